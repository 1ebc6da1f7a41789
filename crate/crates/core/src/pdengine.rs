//! Partial dependence and partial association of function trees.
//!
//! For a variable subset `z`, each node basis splits into the product of its
//! path factors on `z` (`f_k`) and those off `z` (`g_k`). The partial
//! dependence is then `Σ ḡ_k · f_k(z)` with `ḡ_k` the data mean of `g_k`, so
//! one pass over the data per subset replaces `N` model evaluations per
//! grid point. The brute-force average over the data is provided as the
//! reference implementation for any black-box predictor.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{fmt_real, Dataset, VarKind};
use crate::error::{Error, Result};
use crate::functree::FunctionTree;
use crate::smoothers::{spline_fit, UnivariateFunction};
use crate::stats;

/// Default number of quantile points per numeric variable.
pub const DEFAULT_GRID: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectKind {
    Pd,
    Pa,
    PureInteraction,
    Conditional,
}

impl EffectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EffectKind::Pd => "pd",
            EffectKind::Pa => "pa",
            EffectKind::PureInteraction => "pure_interaction",
            EffectKind::Conditional => "conditional",
        }
    }
}

/// Effect values at joint evaluation points over a variable subset.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectGrid {
    pub kind: EffectKind,
    pub subset: Vec<usize>,
    /// One tuple per point, in `subset` order.
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Constant subtracted so the effect has zero mean over the data.
    pub center: f64,
    /// Fraction of node bases mixing the subset with its complement (0 for brute force).
    pub alpha: f64,
    /// Model evaluations charged for the grid values.
    pub evaluations: f64,
    /// Extra evaluations spent on centering (brute force only).
    pub centering_evaluations: f64,
}

impl EffectGrid {
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes one column per subset variable plus `value`, after `#` metadata lines.
    pub fn write_csv(&self, tree_vars: &[crate::dataset::Variable], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let names: Vec<&str> = self.subset.iter().map(|&j| tree_vars[j].name.as_str()).collect();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let meta = format!(
            "# kind: {}\n# subset: {}\n# center: {}\n# alpha: {}\n# evaluations: {}\n",
            self.kind.as_str(),
            names.join(":"),
            fmt_real(self.center),
            fmt_real(self.alpha),
            self.evaluations + self.centering_evaluations,
        );
        file.write_all(meta.as_bytes()).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<&str> = names.clone();
        header.push("value");
        w.write_record(&header)?;
        for (pt, v) in self.points.iter().zip(&self.values) {
            let mut rec: Vec<String> = pt
                .iter()
                .zip(&self.subset)
                .map(|(&x, &j)| {
                    let var = &tree_vars[j];
                    match var.kind {
                        VarKind::Numeric => fmt_real(x),
                        VarKind::Categorical => var
                            .levels
                            .get(x as usize)
                            .cloned()
                            .unwrap_or_else(|| fmt_real(x)),
                    }
                })
                .collect();
            rec.push(fmt_real(*v));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Evaluation points for one variable: `n` evenly spaced quantiles of the
/// data for numeric variables (duplicates removed), every level otherwise.
pub fn default_axis(data: &Dataset, var: usize, n: usize) -> Vec<f64> {
    let v = &data.variables[var];
    match v.kind {
        VarKind::Categorical => (0..v.levels.len()).map(|l| l as f64).collect(),
        VarKind::Numeric => {
            let mut s = data.column(var).to_vec();
            s.sort_by(f64::total_cmp);
            let n = n.max(1);
            let mut out: Vec<f64> = if n == 1 {
                vec![stats::sorted_quantile(&s, 0.5)]
            } else {
                (0..n)
                    .map(|i| stats::sorted_quantile(&s, i as f64 / (n - 1) as f64))
                    .collect()
            };
            out.dedup();
            out
        }
    }
}

/// Cartesian product of per-variable axes; the first variable varies slowest.
pub fn product_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &a in axis {
                let mut q = p.clone();
                q.push(a);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Product grid of default axes over `subset`.
pub fn default_grid(data: &Dataset, subset: &[usize], n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = subset.iter().map(|&j| default_axis(data, j, n)).collect();
    product_grid(&axes)
}

pub(crate) fn check_subset(subset: &[usize], p: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("variable subset is empty".into()));
    }
    for (i, &j) in subset.iter().enumerate() {
        if j >= p {
            return Err(Error::InvalidArgument(format!("variable index {j} out of range")));
        }
        if subset[..i].contains(&j) {
            return Err(Error::InvalidArgument(format!("variable index {j} repeated")));
        }
    }
    Ok(())
}

fn check_points(points: &[Vec<f64>], len: usize) -> Result<()> {
    if points.iter().any(|p| p.len() != len) {
        return Err(Error::InvalidArgument(format!(
            "every evaluation point needs {len} coordinates"
        )));
    }
    Ok(())
}

/// The split of a tree into `A + Σ f_k(z) g_k(z̃)` for one subset `z`.
#[derive(Debug, Clone)]
pub struct TreeDecomposition {
    pub subset: Vec<usize>,
    in_z: Vec<bool>,
    /// Per node (index `k - 1`): whether the path touches `z` / the complement.
    touches_z: Vec<bool>,
    touches_out: Vec<bool>,
    /// Data mean of `g_k` per node (meaningful for nodes touching `z`).
    gbar: Vec<f64>,
    /// Data mean of the `A` part (root constant plus bases not touching `z`).
    pub a_mean: f64,
    /// Fraction of node bases involving both `z` and its complement.
    pub alpha: f64,
}

impl TreeDecomposition {
    /// Nodes whose basis touches `z`: the `(f_k, g_k)` pairs.
    pub fn terms(&self) -> Vec<usize> {
        (1..=self.touches_z.len()).filter(|&k| self.touches_z[k - 1]).collect()
    }

    /// Terms whose `g_k` is not identically one.
    pub fn mixed_terms(&self) -> Vec<usize> {
        self.terms().into_iter().filter(|&k| self.touches_out[k - 1]).collect()
    }

    pub fn gbar(&self, node: usize) -> f64 {
        self.gbar[node - 1]
    }

    pub fn contains(&self, var: usize) -> bool {
        self.in_z[var]
    }

    /// `A(z̃)` at a full row.
    pub fn eval_a(&self, tree: &FunctionTree, x: &[f64]) -> f64 {
        let mut buf = vec![1.0];
        let mut a = tree.b0;
        for n in tree.nodes() {
            let b = buf[n.parent] * n.func.eval(x[n.var]);
            buf.push(b);
            if !self.touches_z[n.id - 1] {
                a += b;
            }
        }
        a
    }

    /// `f_k(z)` for every node at a full row (1 for nodes not touching `z`).
    pub fn eval_f(&self, tree: &FunctionTree, x: &[f64]) -> Vec<f64> {
        self.part(tree, x, true)
    }

    /// `g_k(z̃)` for every node at a full row.
    pub fn eval_g(&self, tree: &FunctionTree, x: &[f64]) -> Vec<f64> {
        self.part(tree, x, false)
    }

    fn part(&self, tree: &FunctionTree, x: &[f64], on_z: bool) -> Vec<f64> {
        let mut buf = vec![1.0];
        for n in tree.nodes() {
            let f = if self.in_z[n.var] == on_z { n.func.eval(x[n.var]) } else { 1.0 };
            buf.push(buf[n.parent] * f);
        }
        buf.remove(0);
        buf
    }
}

/// A tree paired with the data defining the averaging distribution, with
/// node function values at every row precomputed.
pub struct EffectContext<'a> {
    pub tree: &'a FunctionTree,
    pub data: &'a Dataset,
    node_vals: Vec<Vec<f64>>,
    weight: Vec<f64>,
}

impl<'a> EffectContext<'a> {
    pub fn new(tree: &'a FunctionTree, data: &'a Dataset) -> Result<Self> {
        let node_vals = tree.node_values(data)?;
        let total: f64 = data.weight.iter().sum();
        let weight = data.weight.iter().map(|w| w / total).collect();
        Ok(EffectContext {
            tree,
            data,
            node_vals,
            weight,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    /// Normalized row weights (summing to one).
    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn decompose(&self, subset: &[usize]) -> Result<TreeDecomposition> {
        let tree = self.tree;
        let p = tree.n_vars();
        check_subset(subset, p)?;
        let mut in_z = vec![false; p];
        for &j in subset {
            in_z[j] = true;
        }
        let k = tree.n_nodes();
        let mut touches_z = vec![false; k + 1];
        let mut touches_out = vec![false; k + 1];
        for n in tree.nodes() {
            touches_z[n.id] = touches_z[n.parent] || in_z[n.var];
            touches_out[n.id] = touches_out[n.parent] || !in_z[n.var];
        }
        let mixed = (1..=k).filter(|&i| touches_z[i] && touches_out[i]).count();
        let alpha = if k == 0 { 0.0 } else { mixed as f64 / k as f64 };

        // Data means of g_k (for nodes touching z) and of the A part.
        let mut gsum = vec![0.0; k + 1];
        let mut asum = 0.0;
        let mut g = vec![1.0; k + 1];
        let mut b = vec![1.0; k + 1];
        for i in 0..self.n_rows() {
            let wi = self.weight[i];
            let mut a = 0.0;
            for n in tree.nodes() {
                let f = self.node_vals[n.id - 1][i];
                b[n.id] = b[n.parent] * f;
                g[n.id] = if in_z[n.var] { g[n.parent] } else { g[n.parent] * f };
                if touches_z[n.id] {
                    gsum[n.id] += wi * g[n.id];
                } else {
                    a += b[n.id];
                }
            }
            asum += wi * a;
        }
        for i in 1..=k {
            if touches_z[i] && !touches_out[i] {
                gsum[i] = 1.0;
            }
        }
        touches_z.remove(0);
        touches_out.remove(0);
        gsum.remove(0);
        Ok(TreeDecomposition {
            subset: subset.to_vec(),
            in_z,
            touches_z,
            touches_out,
            gbar: gsum,
            a_mean: tree.b0 + asum,
            alpha,
        })
    }

    /// Uncentered partial dependence `Σ ḡ_k f_k(z)` at one point.
    fn pd_point(&self, d: &TreeDecomposition, point: &[f64], buf: &mut Vec<f64>) -> f64 {
        let tree = self.tree;
        buf.clear();
        buf.resize(tree.n_vars(), 0.0);
        for (&j, &x) in d.subset.iter().zip(point) {
            buf[j] = x;
        }
        let mut fz = Vec::with_capacity(tree.n_nodes() + 1);
        fz.push(1.0);
        let mut s = 0.0;
        for n in tree.nodes() {
            let f = if d.in_z[n.var] { fz[n.parent] * n.func.eval(buf[n.var]) } else { fz[n.parent] };
            fz.push(f);
            if d.touches_z[n.id - 1] {
                s += d.gbar[n.id - 1] * f;
            }
        }
        s
    }

    /// Uncentered `f_k(z)` at every row for every node touching `z`
    /// (index `k - 1`, empty for other nodes).
    fn f_rows(&self, d: &TreeDecomposition) -> Vec<Vec<f64>> {
        let n = self.n_rows();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.tree.n_nodes());
        for node in self.tree.nodes() {
            let k = node.id - 1;
            if !d.touches_z[k] {
                out.push(Vec::new());
                continue;
            }
            let parent = if node.parent == 0 || !d.touches_z[node.parent - 1] {
                None
            } else {
                Some(node.parent - 1)
            };
            let col: Vec<f64> = if d.in_z[node.var] {
                let own = &self.node_vals[k];
                match parent {
                    Some(p) => out[p].iter().zip(own).map(|(a, b)| a * b).collect(),
                    None => own.clone(),
                }
            } else {
                match parent {
                    Some(p) => out[p].clone(),
                    None => vec![1.0; n],
                }
            };
            out.push(col);
        }
        out
    }

    /// Uncentered partial dependence at every data row's own `z` values.
    fn pd_rows_raw(&self, d: &TreeDecomposition) -> Vec<f64> {
        let f = self.f_rows(d);
        let mut out = vec![0.0; self.n_rows()];
        for k in d.terms() {
            let g = d.gbar[k - 1];
            for (o, fv) in out.iter_mut().zip(&f[k - 1]) {
                *o += g * fv;
            }
        }
        out
    }

    /// Centered partial dependence at every data row.
    pub fn pd_rows(&self, subset: &[usize]) -> Result<Vec<f64>> {
        let d = self.decompose(subset)?;
        let mut v = self.pd_rows_raw(&d);
        let c = dot(&v, &self.weight);
        v.iter_mut().for_each(|x| *x -= c);
        Ok(v)
    }

    /// Centered tree predictions at every data row.
    pub fn centered_predictions(&self) -> Vec<f64> {
        let n = self.n_rows();
        let mut b = vec![vec![1.0; n]];
        let mut pred = vec![0.0; n];
        for node in self.tree.nodes() {
            let col: Vec<f64> = b[node.parent]
                .iter()
                .zip(&self.node_vals[node.id - 1])
                .map(|(a, f)| a * f)
                .collect();
            for (p, c) in pred.iter_mut().zip(&col) {
                *p += c;
            }
            b.push(col);
        }
        let c = dot(&pred, &self.weight);
        pred.iter_mut().for_each(|x| *x -= c);
        pred
    }

    /// Partial dependence on `subset` at `points`, centered over the data.
    pub fn pd(&self, subset: &[usize], points: &[Vec<f64>]) -> Result<EffectGrid> {
        let d = self.decompose(subset)?;
        check_points(points, subset.len())?;
        let center = dot(&self.pd_rows_raw(&d), &self.weight);
        let values: Vec<f64> = points
            .par_iter()
            .map_init(Vec::new, |buf, p| self.pd_point(&d, p, buf) - center)
            .collect();
        Ok(EffectGrid {
            kind: EffectKind::Pd,
            subset: subset.to_vec(),
            points: points.to_vec(),
            values,
            center,
            alpha: d.alpha,
            evaluations: eval_cost(&d, self.n_rows(), points.len()),
            centering_evaluations: 0.0,
        })
    }

    /// Partial association on `subset` (at most two variables) at `points`.
    pub fn pa(&self, subset: &[usize], points: &[Vec<f64>]) -> Result<EffectGrid> {
        if subset.len() > 2 {
            return Err(Error::InvalidArgument(
                "partial association is limited to subsets of one or two variables".into(),
            ));
        }
        let d = self.decompose(subset)?;
        check_points(points, subset.len())?;
        let h = self.coefficient_functions(&d)?;
        let f = self.f_rows(&d);
        let mut rows = vec![0.0; self.n_rows()];
        for k in d.terms() {
            for (r, &fv) in rows.iter_mut().zip(&f[k - 1]) {
                *r += fv * h[k - 1].as_ref().map_or(1.0, |h| h.eval(fv));
            }
        }
        let center = dot(&rows, &self.weight);
        let tree = self.tree;
        let values: Vec<f64> = points
            .iter()
            .map(|p| {
                let mut x = vec![0.0; tree.n_vars()];
                for (&j, &v) in subset.iter().zip(p) {
                    x[j] = v;
                }
                let fz = d.eval_f(tree, &x);
                d.terms()
                    .into_iter()
                    .map(|k| {
                        let fv = fz[k - 1];
                        fv * h[k - 1].as_ref().map_or(1.0, |h| h.eval(fv))
                    })
                    .sum::<f64>()
                    - center
            })
            .collect();
        Ok(EffectGrid {
            kind: EffectKind::Pa,
            subset: subset.to_vec(),
            points: points.to_vec(),
            values,
            center,
            alpha: d.alpha,
            evaluations: eval_cost(&d, self.n_rows(), points.len()),
            centering_evaluations: 0.0,
        })
    }

    /// Centered partial association at every data row.
    pub fn pa_rows(&self, subset: &[usize]) -> Result<Vec<f64>> {
        if subset.len() > 2 {
            return Err(Error::InvalidArgument(
                "partial association is limited to subsets of one or two variables".into(),
            ));
        }
        let d = self.decompose(subset)?;
        let h = self.coefficient_functions(&d)?;
        let f = self.f_rows(&d);
        let mut rows = vec![0.0; self.n_rows()];
        for k in d.terms() {
            for (r, &fv) in rows.iter_mut().zip(&f[k - 1]) {
                *r += fv * h[k - 1].as_ref().map_or(1.0, |h| h.eval(fv));
            }
        }
        let c = dot(&rows, &self.weight);
        rows.iter_mut().for_each(|x| *x -= c);
        Ok(rows)
    }

    /// `h_k`, the regression of `g_k` on `f_k` over the data, for mixed terms
    /// (`None` where `g_k ≡ 1`). Constant `f_k` gives `h_k = ḡ_k`.
    fn coefficient_functions(&self, d: &TreeDecomposition) -> Result<Vec<Option<UnivariateFunction>>> {
        let f = self.f_rows(d);
        let n = self.n_rows();
        let mixed = d.mixed_terms();
        let mut g_rows: Vec<Vec<f64>> = vec![Vec::new(); self.tree.n_nodes()];
        for &k in &mixed {
            let node = &self.tree.nodes()[k - 1];
            let own = &self.node_vals[k - 1];
            let parent_g = if node.parent == 0 { None } else { Some(node.parent - 1) };
            let col: Vec<f64> = (0..n)
                .map(|i| {
                    let pg = parent_g.map_or(1.0, |p| self.g_value(d, p + 1, i));
                    if d.in_z[node.var] { pg } else { pg * own[i] }
                })
                .collect();
            g_rows[k - 1] = col;
        }
        let mut out: Vec<Option<UnivariateFunction>> = vec![None; self.tree.n_nodes()];
        let fitted: Vec<(usize, Result<UnivariateFunction>)> = mixed
            .par_iter()
            .map(|&k| {
                let fk = &f[k - 1];
                let first = fk[0];
                let h = if fk.iter().all(|&v| v == first) {
                    Ok(UnivariateFunction::constant(d.gbar[k - 1]))
                } else {
                    spline_fit(fk, &g_rows[k - 1])
                };
                (k, h)
            })
            .collect();
        for (k, h) in fitted {
            out[k - 1] = Some(h?);
        }
        Ok(out)
    }

    /// `g_k` at row `i` (product of path factors off `z`).
    fn g_value(&self, d: &TreeDecomposition, node: usize, i: usize) -> f64 {
        let mut g = 1.0;
        let mut k = node;
        while k != 0 {
            let n = &self.tree.nodes()[k - 1];
            if !d.in_z[n.var] {
                g *= self.node_vals[k - 1][i];
            }
            k = n.parent;
        }
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Decomposes `tree` for `subset`, with `ḡ_k` taken over `data`.
pub fn decompose(tree: &FunctionTree, subset: &[usize], data: &Dataset) -> Result<TreeDecomposition> {
    EffectContext::new(tree, data)?.decompose(subset)
}

/// Fast partial dependence from the tree decomposition.
pub fn pd_fast(tree: &FunctionTree, subset: &[usize], points: &[Vec<f64>], data: &Dataset) -> Result<EffectGrid> {
    EffectContext::new(tree, data)?.pd(subset, points)
}

/// Partial association (one or two variables).
pub fn pa(tree: &FunctionTree, subset: &[usize], points: &[Vec<f64>], data: &Dataset) -> Result<EffectGrid> {
    EffectContext::new(tree, data)?.pa(subset, points)
}

/// Model evaluations charged for a fast partial dependence: `N_z + α·N`.
pub fn eval_cost(decomp: &TreeDecomposition, n: usize, n_z: usize) -> f64 {
    n_z as f64 + decomp.alpha * n as f64
}

/// Brute-force partial dependence of any predictor: at each point, the
/// weighted average over all data rows with the subset's columns
/// overwritten. Centering averages the same quantity over the distinct
/// subset values present in the data.
pub fn pd_brute<F>(predict: &F, subset: &[usize], points: &[Vec<f64>], data: &Dataset) -> Result<EffectGrid>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_subset(subset, data.n_vars())?;
    check_points(points, subset.len())?;
    let n = data.n_rows();
    let total: f64 = data.weight.iter().sum();
    let average = |point: &[f64], row: &mut Vec<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            data.fill_row(i, row);
            for (&j, &v) in subset.iter().zip(point) {
                row[j] = v;
            }
            s += data.weight[i] * predict(row);
        }
        s / total
    };
    let raw: Vec<f64> = points
        .par_iter()
        .map_init(|| vec![0.0; data.n_vars()], |row, p| average(p, row))
        .collect();

    // Distinct subset tuples in the data, with their total weights.
    let mut tuples: Vec<(Vec<f64>, f64)> = Vec::new();
    {
        let mut keyed: Vec<(Vec<u64>, Vec<f64>, f64)> = (0..n)
            .map(|i| {
                let t: Vec<f64> = subset.iter().map(|&j| data.value(i, j)).collect();
                (t.iter().map(|v| v.to_bits()).collect(), t, data.weight[i])
            })
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        for (key, t, w) in keyed {
            match tuples.last_mut() {
                Some((last, lw)) if last.iter().map(|v| v.to_bits()).eq(key.iter().copied()) => *lw += w,
                _ => tuples.push((t, w)),
            }
        }
    }
    let center_vals: Vec<f64> = tuples
        .par_iter()
        .map_init(|| vec![0.0; data.n_vars()], |row, (t, _)| average(t, row))
        .collect();
    let center = tuples.iter().zip(&center_vals).map(|((_, w), v)| w * v).sum::<f64>() / total;
    Ok(EffectGrid {
        kind: EffectKind::Pd,
        subset: subset.to_vec(),
        points: points.to_vec(),
        values: raw.iter().map(|v| v - center).collect(),
        center,
        alpha: 0.0,
        evaluations: (n * points.len()) as f64,
        centering_evaluations: (n * tuples.len()) as f64,
    })
}
