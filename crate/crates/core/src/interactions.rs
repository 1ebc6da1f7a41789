//! Pure interaction effects, their strengths, screening, subset search,
//! conditional slices, model differencing and bootstrap comparison of
//! constrained refits.
//!
//! The pure interaction of a subset `s` is its partial dependence with every
//! lower-order pure interaction among its proper subsets removed. Within one
//! call all partial dependences of the subset lattice are computed once.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{self, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::functree::{fit, FitConfig, FunctionTree};
use crate::pdengine::{check_subset, pd_brute, EffectContext, EffectGrid, EffectKind};
use crate::stats;

/// Combines partial dependences indexed by bitmask over the subset positions
/// into pure interactions: `I(u) = PD(u) − Σ_{v ⊊ u} I(v)`.
fn pure_from_pd(pd: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let full = pd.len();
    let len = pd.get(1).map_or(0, Vec::len);
    let mut pure: Vec<Vec<f64>> = vec![Vec::new(); full];
    for mask in 1..full {
        let mut v = pd[mask].clone();
        // Proper nonempty submasks of `mask`.
        let mut sub = (mask - 1) & mask;
        while sub > 0 {
            for (a, b) in v.iter_mut().zip(&pure[sub]) {
                *a -= b;
            }
            sub = (sub - 1) & mask;
        }
        debug_assert_eq!(v.len(), len);
        pure[mask] = v;
    }
    pure
}

fn mask_members(subset: &[usize], mask: usize) -> Vec<usize> {
    subset
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &j)| j)
        .collect()
}

fn project(points: &[Vec<f64>], mask: usize) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &x)| x)
                .collect()
        })
        .collect()
}

fn check_order(s: &[usize]) -> Result<()> {
    if s.is_empty() || s.len() > 4 {
        return Err(Error::InvalidArgument(format!(
            "interaction subsets must have 1 to 4 variables, got {}",
            s.len()
        )));
    }
    Ok(())
}

/// Partial dependences and pure interactions over every nonempty subset of
/// `subset`, evaluated on one shared set of points. Index by bitmask over
/// the positions in `subset`.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub subset: Vec<usize>,
    pub pd: Vec<Vec<f64>>,
    pub pure: Vec<Vec<f64>>,
    pub evaluations: f64,
}

impl Lattice {
    pub fn members(&self, mask: usize) -> Vec<usize> {
        mask_members(&self.subset, mask)
    }
}

/// Fast lattice from the tree decomposition.
pub fn interaction_lattice(
    tree: &FunctionTree,
    s: &[usize],
    points: &[Vec<f64>],
    data: &Dataset,
) -> Result<Lattice> {
    check_order(s)?;
    check_subset(s, tree.n_vars())?;
    let ctx = EffectContext::new(tree, data)?;
    let full = 1usize << s.len();
    let mut pd = vec![Vec::new(); full];
    let mut evaluations = 0.0;
    for (mask, slot) in pd.iter_mut().enumerate().skip(1) {
        let g = ctx.pd(&mask_members(s, mask), &project(points, mask))?;
        evaluations += g.evaluations;
        *slot = g.values;
    }
    let pure = pure_from_pd(&pd);
    Ok(Lattice {
        subset: s.to_vec(),
        pd,
        pure,
        evaluations,
    })
}

/// Brute-force lattice for any predictor.
pub fn interaction_lattice_brute<F>(predict: &F, s: &[usize], points: &[Vec<f64>], data: &Dataset) -> Result<Lattice>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_order(s)?;
    check_subset(s, data.n_vars())?;
    let full = 1usize << s.len();
    let mut pd = vec![Vec::new(); full];
    let mut evaluations = 0.0;
    for (mask, slot) in pd.iter_mut().enumerate().skip(1) {
        let g = pd_brute(predict, &mask_members(s, mask), &project(points, mask), data)?;
        evaluations += g.evaluations + g.centering_evaluations;
        *slot = g.values;
    }
    let pure = pure_from_pd(&pd);
    Ok(Lattice {
        subset: s.to_vec(),
        pd,
        pure,
        evaluations,
    })
}

fn lattice_grid(l: Lattice, points: &[Vec<f64>], alpha: f64, kind: EffectKind) -> EffectGrid {
    let full = l.pure.len() - 1;
    EffectGrid {
        kind,
        subset: l.subset,
        points: points.to_vec(),
        values: l.pure[full].clone(),
        center: 0.0,
        alpha,
        evaluations: l.evaluations,
        centering_evaluations: 0.0,
    }
}

/// Pure interaction of `s` (1 to 4 variables) at `points`.
pub fn pure_interaction(tree: &FunctionTree, s: &[usize], points: &[Vec<f64>], data: &Dataset) -> Result<EffectGrid> {
    let l = interaction_lattice(tree, s, points, data)?;
    let alpha = EffectContext::new(tree, data)?.decompose(s)?.alpha;
    Ok(lattice_grid(l, points, alpha, EffectKind::PureInteraction))
}

/// Brute-force pure interaction of any predictor.
pub fn pure_interaction_brute<F>(predict: &F, s: &[usize], points: &[Vec<f64>], data: &Dataset) -> Result<EffectGrid>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let l = interaction_lattice_brute(predict, s, points, data)?;
    Ok(lattice_grid(l, points, 0.0, EffectKind::PureInteraction))
}

fn check_cond(s: &[usize], cond: &[(usize, f64)], p: usize) -> Result<()> {
    for &(j, _) in cond {
        if j >= p {
            return Err(Error::InvalidArgument(format!("variable index {j} out of range")));
        }
        if s.contains(&j) {
            return Err(Error::InvalidArgument(
                "conditioning variables must be disjoint from the subset".into(),
            ));
        }
    }
    Ok(())
}

/// Pure interaction of `s` with the `cond` variables pinned at fixed values,
/// computed on the pinned tree's decomposition.
pub fn conditional_interaction(
    tree: &FunctionTree,
    s: &[usize],
    cond: &[(usize, f64)],
    points: &[Vec<f64>],
    data: &Dataset,
) -> Result<EffectGrid> {
    check_cond(s, cond, tree.n_vars())?;
    let pinned = tree.pinned(cond)?;
    let mut g = pure_interaction(&pinned, s, points, data)?;
    g.kind = EffectKind::Conditional;
    Ok(g)
}

/// Reference version of [`conditional_interaction`]: brute-force partial
/// dependences of the restricted prediction function.
pub fn conditional_interaction_brute(
    tree: &FunctionTree,
    s: &[usize],
    cond: &[(usize, f64)],
    points: &[Vec<f64>],
    data: &Dataset,
) -> Result<EffectGrid> {
    check_cond(s, cond, tree.n_vars())?;
    for &(j, v) in cond {
        let var = &tree.variables[j];
        if var.kind == dataset::VarKind::Numeric && (v < var.range.0 || v > var.range.1) {
            log::warn!("conditioning value {v} outside the observed range of {}", var.name);
        }
    }
    let restricted = |x: &[f64]| {
        let mut row = x.to_vec();
        for &(j, v) in cond {
            row[j] = v;
        }
        tree.predict(&row)
    };
    let mut g = pure_interaction_brute(&restricted, s, points, data)?;
    g.kind = EffectKind::Conditional;
    Ok(g)
}

/// Memoized partial dependences and pure interactions at the data rows.
struct RowLattice<'c, 'a> {
    ctx: &'c EffectContext<'a>,
    use_pa: bool,
    pd: HashMap<Vec<usize>, Vec<f64>>,
    pure: HashMap<Vec<usize>, Vec<f64>>,
    evaluations: f64,
}

impl<'c, 'a> RowLattice<'c, 'a> {
    fn new(ctx: &'c EffectContext<'a>, use_pa: bool) -> Self {
        RowLattice {
            ctx,
            use_pa,
            pd: HashMap::new(),
            pure: HashMap::new(),
            evaluations: 0.0,
        }
    }

    /// Computes all missing partial dependences for the given sorted subsets
    /// (and their sub-lattices) in parallel.
    fn prefetch(&mut self, subsets: &[Vec<usize>]) -> Result<()> {
        let mut need: Vec<Vec<usize>> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for s in subsets {
            for mask in 1..(1usize << s.len()) {
                let u = mask_members(s, mask);
                if !self.pd.contains_key(&u) && seen.insert(u.clone()) {
                    need.push(u);
                }
            }
        }
        let n = self.ctx.n_rows();
        let ctx = self.ctx;
        let use_pa = self.use_pa;
        let computed: Vec<(Vec<usize>, Result<(Vec<f64>, f64)>)> = need
            .into_par_iter()
            .map(|u| {
                let r = (|| {
                    let d = ctx.decompose(&u)?;
                    let cost = crate::pdengine::eval_cost(&d, n, n);
                    let v = if use_pa { ctx.pa_rows(&u)? } else { ctx.pd_rows(&u)? };
                    Ok((v, cost))
                })();
                (u, r)
            })
            .collect();
        for (u, r) in computed {
            let (v, cost) = r?;
            self.evaluations += cost;
            self.pd.insert(u, v);
        }
        Ok(())
    }

    fn pure(&mut self, s: &[usize]) -> Result<Vec<f64>> {
        if let Some(v) = self.pure.get(s) {
            return Ok(v.clone());
        }
        if !self.pd.contains_key(s) {
            self.prefetch(&[s.to_vec()])?;
        }
        let mut v = self.pd[s].clone();
        for mask in 1..(1usize << s.len()) - 1 {
            let u = mask_members(s, mask);
            let iu = self.pure(&u)?;
            for (a, b) in v.iter_mut().zip(&iu) {
                *a -= b;
            }
        }
        self.pure.insert(s.to_vec(), v.clone());
        Ok(v)
    }
}

fn weighted_var0(v: &[f64], w: &[f64]) -> f64 {
    let m: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
    v.iter().zip(w).map(|(a, b)| b * (a - m) * (a - m)).sum()
}

/// Strength of the pure interaction of `s`: its sd over the data rows
/// divided by the sd of the model's predictions.
pub fn strength(tree: &FunctionTree, s: &[usize], data: &Dataset) -> Result<f64> {
    check_order(s)?;
    check_subset(s, tree.n_vars())?;
    let ctx = EffectContext::new(tree, data)?;
    let fvar = weighted_var0(&ctx.centered_predictions(), ctx.weights());
    if !(fvar > 0.0) {
        return Err(Error::Degenerate("model predictions are constant".into()));
    }
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    let mut lat = RowLattice::new(&ctx, false);
    let i = lat.pure(&sorted)?;
    Ok((weighted_var0(&i, ctx.weights()) / fvar).sqrt())
}

/// Per-variable overall interaction scores.
#[derive(Debug, Clone, PartialEq)]
pub struct HScreen {
    pub scores: Vec<f64>,
    pub threshold: f64,
    /// Variables at or above the threshold: the interacting pool.
    pub flagged: Vec<usize>,
    pub evaluations: f64,
}

/// `H_j = sqrt(E[(F − PD(x_j) − PD(x_\j))²])` with a centered model,
/// flagged when at least `rel · sd(F)`.
pub fn screen_h(tree: &FunctionTree, data: &Dataset, rel: f64) -> Result<HScreen> {
    let ctx = EffectContext::new(tree, data)?;
    screen_h_ctx(&ctx, rel)
}

fn screen_h_ctx(ctx: &EffectContext, rel: f64) -> Result<HScreen> {
    let p = ctx.tree.n_vars();
    let n = ctx.n_rows();
    let f = ctx.centered_predictions();
    let w = ctx.weights();
    let sd = weighted_var0(&f, w).sqrt();
    let used = ctx.tree.used_vars();
    let results: Vec<(f64, f64)> = (0..p)
        .into_par_iter()
        .map(|j| -> Result<(f64, f64)> {
            if !used.contains(&j) || p == 1 {
                return Ok((0.0, 0.0));
            }
            let rest: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let a = ctx.pd_rows(&[j])?;
            let b = ctx.pd_rows(&rest)?;
            let cost = crate::pdengine::eval_cost(&ctx.decompose(&[j])?, n, n)
                + crate::pdengine::eval_cost(&ctx.decompose(&rest)?, n, n);
            let h2: f64 = (0..n).map(|i| w[i] * (f[i] - a[i] - b[i]).powi(2)).sum();
            Ok((h2.max(0.0).sqrt(), cost))
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = rel * sd;
    let scores: Vec<f64> = results.iter().map(|r| r.0).collect();
    let flagged = (0..p).filter(|&j| scores[j] >= threshold && scores[j] > 0.0).collect();
    Ok(HScreen {
        scores,
        threshold,
        flagged,
        evaluations: n as f64 + results.iter().map(|r| r.1).sum::<f64>(),
    })
}

/// `R[j][k-1]`: summed influence of nodes with variable `j` on their path
/// and interaction order `k`, for `k = 1..=levels`.
pub fn screen_r(tree: &FunctionTree, levels: usize) -> Vec<Vec<f64>> {
    let mut r = vec![vec![0.0; levels]; tree.n_vars()];
    for node in tree.nodes() {
        let vars = tree.path_vars(node.id);
        let k = vars.len();
        if k == 0 || k > levels {
            continue;
        }
        for j in vars {
            r[j][k - 1] += node.influence;
        }
    }
    r
}

/// Variables passing the R-screen for searches of order `n`: those with a
/// contribution at level `n` or higher of at least `rel` times the largest
/// entry of `r`.
pub fn r_pool(r: &[Vec<f64>], n: usize, rel: f64) -> Vec<usize> {
    let top = r.iter().flatten().copied().fold(0.0, f64::max);
    (0..r.len())
        .filter(|&j| r[j].iter().skip(n.max(1) - 1).any(|&v| v > 0.0 && v >= rel * top))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub max_order: usize,
    pub use_screens: bool,
    /// H-screen threshold relative to the model's sd.
    pub h_rel: f64,
    /// R-screen threshold relative to the largest entry of the R table.
    pub r_rel: f64,
    /// Averaging sample size (rows drawn from the data); `None` uses all rows.
    pub context_rows: Option<usize>,
    /// Also compute strengths from partial association (orders 1 and 2).
    pub with_pa: bool,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_order: 3,
            use_screens: true,
            h_rel: 0.05,
            r_rel: 0.05,
            context_rows: Some(1000),
            with_pa: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEntry {
    /// Sorted variable indices.
    pub subset: Vec<usize>,
    pub strength: f64,
    pub order: usize,
    pub pa_strength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenLog {
    pub h: Option<HScreen>,
    pub r: Vec<Vec<f64>>,
    /// Variable pool searched at each order (index `n - 1`).
    pub pools: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectReport {
    /// Sorted by order, then strength descending.
    pub entries: Vec<EffectEntry>,
    pub screening: ScreenLog,
    /// Model evaluations charged: `N_z + α·N` per partial dependence plus screening.
    pub evaluations: f64,
    pub n_pd: usize,
}

impl EffectReport {
    /// Entries across all orders, strongest first.
    pub fn ranked(&self) -> Vec<&EffectEntry> {
        let mut v: Vec<&EffectEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.strength.total_cmp(&a.strength).then(a.subset.cmp(&b.subset)));
        v
    }

    pub fn of_order(&self, n: usize) -> Vec<&EffectEntry> {
        self.entries.iter().filter(|e| e.order == n).collect()
    }

    pub fn find(&self, subset: &[usize]) -> Option<&EffectEntry> {
        let mut s = subset.to_vec();
        s.sort_unstable();
        self.entries.iter().find(|e| e.subset == s)
    }

    pub fn write_csv(&self, vars: &[dataset::Variable], path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let pa = self.entries.iter().any(|e| e.pa_strength.is_some());
        let mut header = vec!["subset", "order", "strength"];
        if pa {
            header.push("pa_strength");
        }
        w.write_record(&header)?;
        for e in &self.entries {
            let names: Vec<&str> = e.subset.iter().map(|&j| vars[j].name.as_str()).collect();
            let mut rec = vec![names.join(":"), e.order.to_string(), dataset::fmt_real(e.strength)];
            if pa {
                rec.push(e.pa_strength.map_or(String::new(), dataset::fmt_real));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(())
    }

    /// Human-readable account of what each screen kept and dropped.
    pub fn screening_text(&self, vars: &[dataset::Variable]) -> String {
        let mut s = String::new();
        let name = |j: usize| vars[j].name.as_str();
        match &self.screening.h {
            Some(h) => {
                let _ = writeln!(s, "H-screen threshold {}", dataset::fmt_real(h.threshold));
                for (j, &score) in h.scores.iter().enumerate() {
                    let kept = if h.flagged.contains(&j) { "interacting" } else { "excluded" };
                    let _ = writeln!(s, "H {} {} {kept}", name(j), dataset::fmt_real(score));
                }
            }
            None => s.push_str("screening disabled\n"),
        }
        for (j, row) in self.screening.r.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if *v > 0.0 {
                    let _ = writeln!(s, "R {} level {} {}", name(j), k + 1, dataset::fmt_real(*v));
                }
            }
        }
        for (n, pool) in self.screening.pools.iter().enumerate() {
            let names: Vec<&str> = pool.iter().map(|&j| name(j)).collect();
            let _ = writeln!(s, "order {} pool [{}]", n + 1, names.join(","));
        }
        let _ = writeln!(s, "partial dependences {} evaluations {}", self.n_pd, self.evaluations);
        s
    }
}

fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(pool: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            rec(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= pool.len() {
        rec(pool, k, 0, &mut Vec::new(), &mut out);
    }
    out
}

/// Enumerates variable subsets up to `opts.max_order` (at most 4), scores
/// each by [`strength`], and returns the ranked report.
pub fn search_effects(tree: &FunctionTree, data: &Dataset, opts: &SearchOptions) -> Result<EffectReport> {
    if opts.max_order == 0 || opts.max_order > 4 {
        return Err(Error::InvalidArgument("max_order must be between 1 and 4".into()));
    }
    let sample;
    let data = match opts.context_rows {
        Some(n) if n < data.n_rows() => {
            sample = data.subsample(n, opts.seed);
            &sample
        }
        _ => data,
    };
    let ctx = EffectContext::new(tree, data)?;
    let p = tree.n_vars();
    let fvar = weighted_var0(&ctx.centered_predictions(), ctx.weights());
    let levels = opts.max_order.max(tree.max_interaction_order()).max(4);
    let r = screen_r(tree, levels);
    let (h, pools) = if opts.use_screens {
        let h = screen_h_ctx(&ctx, opts.h_rel)?;
        let mut pools = Vec::new();
        for n in 1..=opts.max_order {
            let rp = r_pool(&r, n, opts.r_rel);
            let pool: Vec<usize> = if n == 1 {
                rp
            } else {
                rp.into_iter().filter(|j| h.flagged.contains(j)).collect()
            };
            pools.push(pool);
        }
        (Some(h), pools)
    } else {
        (None, vec![(0..p).collect(); opts.max_order])
    };

    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for (n, pool) in pools.iter().enumerate() {
        subsets.extend(combinations(pool, n + 1));
    }
    let mut entries = Vec::with_capacity(subsets.len());
    let mut evaluations = h.as_ref().map_or(0.0, |h| h.evaluations);
    let mut n_pd = 0;
    if fvar > 0.0 {
        let mut lat = RowLattice::new(&ctx, false);
        lat.prefetch(&subsets)?;
        let mut pa_lat = RowLattice::new(&ctx, true);
        if opts.with_pa {
            let small: Vec<Vec<usize>> = subsets.iter().filter(|s| s.len() <= 2).cloned().collect();
            pa_lat.prefetch(&small)?;
        }
        for s in &subsets {
            let i = lat.pure(s)?;
            let strength = (weighted_var0(&i, ctx.weights()) / fvar).sqrt();
            let pa_strength = if opts.with_pa && s.len() <= 2 {
                let ipa = pa_lat.pure(s)?;
                Some((weighted_var0(&ipa, ctx.weights()) / fvar).sqrt())
            } else {
                None
            };
            entries.push(EffectEntry {
                subset: s.clone(),
                strength,
                order: s.len(),
                pa_strength,
            });
        }
        evaluations += lat.evaluations + pa_lat.evaluations;
        n_pd = lat.pd.len() + pa_lat.pd.len();
    } else {
        log::warn!("model predictions are constant; all strengths are zero");
        entries.extend(subsets.iter().map(|s| EffectEntry {
            subset: s.clone(),
            strength: 0.0,
            order: s.len(),
            pa_strength: None,
        }));
    }
    entries.sort_by(|a, b| {
        a.order
            .cmp(&b.order)
            .then(b.strength.total_cmp(&a.strength))
            .then(a.subset.cmp(&b.subset))
    });
    Ok(EffectReport {
        entries,
        screening: ScreenLog { h, r, pools },
        evaluations,
        n_pd,
    })
}

/// The difference model `a − b` as a single function tree over the shared
/// schema: `b`'s root children are negated so every basis of `b` changes sign.
pub fn model_diff(a: &FunctionTree, b: &FunctionTree) -> Result<FunctionTree> {
    if a.variables.len() != b.variables.len()
        || a.variables.iter().zip(&b.variables).any(|(x, y)| x.name != y.name || x.kind != y.kind)
    {
        return Err(Error::SchemaMismatch("models have different variable schemas".into()));
    }
    let mut out = a.clone();
    out.b0 = a.b0 - b.b0;
    let offset = a.n_nodes();
    for n in b.nodes() {
        let (parent, func) = if n.parent == 0 {
            (0, n.func.scaled(-1.0))
        } else {
            (n.parent + offset, n.func.clone())
        };
        out.add_node(parent, n.var, func)?;
    }
    out.stats = Default::default();
    Ok(out)
}

/// Out-of-bootstrap test RMSE for each configuration over the replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub rmse: Vec<f64>,
}

impl BootstrapResult {
    pub fn quantile(&self, q: f64) -> f64 {
        let mut s = self.rmse.clone();
        s.sort_by(f64::total_cmp);
        stats::sorted_quantile(&s, q)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

const BOOTSTRAP_STREAM: u64 = 0xB007;

/// Refits every configuration on `reps` bootstrap resamples of `data` and
/// records the RMSE on the rows left out of each resample.
///
/// A resample is represented by its distinct rows with their multiplicities
/// as row weights, so the stopping split inside each fit never places copies
/// of one row on both sides.
pub fn bootstrap_compare(data: &Dataset, configs: &[FitConfig], reps: usize, seed: u64) -> Result<Vec<BootstrapResult>> {
    if reps < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least 2 replicates".into()));
    }
    let n = data.n_rows();
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut rng = stats::rng_stream(seed, BOOTSTRAP_STREAM + rep as u64);
            let mut count = vec![0u32; n];
            for _ in 0..n {
                count[rng.random_range(0..n)] += 1;
            }
            let inbag: Vec<usize> = (0..n).filter(|&i| count[i] > 0).collect();
            let oob: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
            let mut train = data.select_rows(&inbag);
            for (w, &i) in train.weight.iter_mut().zip(&inbag) {
                *w *= count[i] as f64;
            }
            let test = data.select_rows(&oob);
            configs
                .iter()
                .map(|cfg| {
                    let cfg = FitConfig {
                        split: cfg.split.map(|s| SplitSpec {
                            seed: s.seed ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                            ..s
                        }),
                        ..cfg.clone()
                    };
                    let tree = fit(&train, &cfg)?;
                    let pred = tree.predict_dataset(&test)?;
                    dataset::rmse(&test.outcome, &pred)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..configs.len())
        .map(|c| BootstrapResult {
            rmse: per_rep.iter().map(|r| r[c]).collect(),
        })
        .collect())
}
