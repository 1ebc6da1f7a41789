//! Function-tree models: evaluation, forward stepwise construction,
//! backfitting and the model file format.
//!
//! Every non-root node `k` carries a univariate function `f_k` of one
//! predictor. Its basis function `B_k` is the product of the functions on the
//! path from `k` up to the root, and the model is `b0 + Σ_k B_k(x)`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, SplitSpec, VarKind, Variable};
use crate::error::{Error, Result};
use crate::smoothers::{w_floor, Axis, Scratch, SmoothMethod, SmootherSpec, UnivariateFunction};

/// Version tag written into model files.
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Node id, starting at 1; the root is id 0 and is not stored.
    pub id: usize,
    pub parent: usize,
    pub var: usize,
    pub func: UnivariateFunction,
    /// Standard deviation of the node's basis function over the training rows.
    pub influence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainStats {
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
    pub n_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTree {
    pub variables: Vec<Variable>,
    pub b0: f64,
    nodes: Vec<TreeNode>,
    pub stats: TrainStats,
}

impl FunctionTree {
    /// Root-only tree predicting `b0`.
    pub fn new(variables: Vec<Variable>, b0: f64) -> Self {
        FunctionTree {
            variables,
            b0,
            nodes: Vec::new(),
            stats: TrainStats::default(),
        }
    }

    /// Attaches a new node under `parent` and returns its id.
    pub fn add_node(&mut self, parent: usize, var: usize, func: UnivariateFunction) -> Result<usize> {
        if parent > self.nodes.len() {
            return Err(Error::InvalidArgument(format!("parent {parent} does not exist")));
        }
        let v = self
            .variables
            .get(var)
            .ok_or_else(|| Error::InvalidArgument(format!("variable index {var} out of range")))?;
        if v.is_categorical() != func.is_categorical() {
            return Err(Error::InvalidArgument(format!(
                "function kind does not match variable {}",
                v.name
            )));
        }
        let id = self.nodes.len() + 1;
        self.nodes.push(TreeNode {
            id,
            parent,
            var,
            func,
            influence: 0.0,
        });
        self.stats.n_nodes = self.nodes.len();
        Ok(id)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Option<&TreeNode> {
        id.checked_sub(1).and_then(|k| self.nodes.get(k))
    }

    pub(crate) fn set_func(&mut self, id: usize, func: UnivariateFunction) {
        self.nodes[id - 1].func = func;
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Node ids from `id` up to (excluding) the root.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut k = id;
        while k != 0 {
            out.push(k);
            k = self.nodes[k - 1].parent;
        }
        out
    }

    /// Sorted distinct variables on the path from `id` to the root.
    pub fn path_vars(&self, id: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.path(id).iter().map(|&k| self.nodes[k - 1].var).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn children(&self, id: usize) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.parent == id).map(|n| n.id).collect()
    }

    /// Number of distinct variables on the node's root path.
    pub fn interaction_order(&self, id: usize) -> Result<usize> {
        if id == 0 {
            return Err(Error::InvalidArgument("the root has no interaction order".into()));
        }
        if id > self.nodes.len() {
            return Err(Error::InvalidArgument(format!("node {id} does not exist")));
        }
        Ok(self.path_vars(id).len())
    }

    /// Largest interaction order over all nodes (0 for a root-only tree).
    pub fn max_interaction_order(&self) -> usize {
        (1..=self.nodes.len())
            .map(|k| self.path_vars(k).len())
            .max()
            .unwrap_or(0)
    }

    /// Variables used anywhere in the tree.
    pub fn used_vars(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.nodes.iter().map(|n| n.var).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut buf = Vec::with_capacity(self.nodes.len() + 1);
        self.predict_with(x, &mut buf)
    }

    /// As [`predict`](Self::predict), reusing `buf` for the basis values.
    pub fn predict_with(&self, x: &[f64], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.push(1.0);
        let mut sum = self.b0;
        for n in &self.nodes {
            let b = buf[n.parent] * n.func.eval(x[n.var]);
            buf.push(b);
            sum += b;
        }
        sum
    }

    /// Fails unless `data` has this tree's variables, in order, with compatible types.
    pub fn check_schema(&self, data: &Dataset) -> Result<()> {
        if data.n_vars() != self.variables.len() {
            return Err(Error::SchemaMismatch(format!(
                "model has {} variables, data has {}",
                self.variables.len(),
                data.n_vars()
            )));
        }
        for (a, b) in self.variables.iter().zip(&data.variables) {
            if !a.compatible_with(b) {
                return Err(Error::SchemaMismatch(format!(
                    "variable {} does not match data column {}",
                    a.name, b.name
                )));
            }
        }
        Ok(())
    }

    /// Node function values `f_k(x_{i, j(k)})`, one column per node.
    pub fn node_values(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        self.check_schema(data)?;
        Ok(self
            .nodes
            .par_iter()
            .map(|n| data.column(n.var).iter().map(|&x| n.func.eval(x)).collect())
            .collect())
    }

    /// `B_k(x_i)` for every node, one column per node.
    pub fn basis_values(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        let mut cols = self.node_values(data)?;
        for k in 0..cols.len() {
            let p = self.nodes[k].parent;
            if p != 0 {
                let (head, tail) = cols.split_at_mut(k);
                for (b, &pb) in tail[0].iter_mut().zip(&head[p - 1]) {
                    *b *= pb;
                }
            }
        }
        Ok(cols)
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        let basis = self.basis_values(data)?;
        let mut out = vec![self.b0; data.n_rows()];
        for col in &basis {
            for (o, b) in out.iter_mut().zip(col) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// The restriction with each listed variable fixed at a value: nodes on
    /// those variables become constants.
    pub fn pinned(&self, cond: &[(usize, f64)]) -> Result<FunctionTree> {
        let mut t = self.clone();
        for &(var, value) in cond {
            let v = self
                .variables
                .get(var)
                .ok_or_else(|| Error::InvalidArgument(format!("variable index {var} out of range")))?;
            if v.kind == VarKind::Numeric && (value < v.range.0 || value > v.range.1) {
                log::warn!(
                    "conditioning value {value} outside the observed range of {}; constant extrapolation applies",
                    v.name
                );
            }
            for n in t.nodes.iter_mut().filter(|n| n.var == var) {
                let c = n.func.eval(value);
                n.func = match &n.func {
                    UnivariateFunction::Curve(_) => UnivariateFunction::constant(c),
                    UnivariateFunction::LevelTable(lt) => {
                        UnivariateFunction::level_table(vec![c; lt.values().len()], c)?
                    }
                };
            }
        }
        Ok(t)
    }

    /// Recomputes node influences as the population sd of each basis over `data`.
    pub fn set_influences(&mut self, data: &Dataset) -> Result<()> {
        let basis = self.basis_values(data)?;
        for (n, col) in self.nodes.iter_mut().zip(&basis) {
            n.influence = crate::stats::weighted_var(col, &data.weight).sqrt();
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FunctionTree> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc::from_tree(self);
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, Real17);
        doc.serialize(&mut ser)?;
        out.push(b'\n');
        Ok(String::from_utf8(out).expect("serializer emits UTF-8"))
    }

    pub fn from_json(text: &str) -> Result<FunctionTree> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        let version = probe
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Model("missing format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let doc: ModelDoc = serde_json::from_value(probe)?;
        doc.into_tree()
    }
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

/// JSON formatter writing every real with 17 significant digits.
struct Real17;

impl serde_json::ser::Formatter for Real17 {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u64,
    b0: f64,
    variables: Vec<VarDoc>,
    nodes: Vec<NodeDoc>,
    train_stats: StatsDoc,
}

#[derive(Serialize, Deserialize)]
struct VarDoc {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range: Option<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    parent: usize,
    var: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knots: Option<Vec<f64>>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<f64>,
    influence: f64,
}

#[derive(Serialize, Deserialize)]
struct StatsDoc {
    train_rmse: f64,
    test_rmse: Option<f64>,
    n_nodes: usize,
}

impl ModelDoc {
    fn from_tree(t: &FunctionTree) -> Self {
        let variables = t
            .variables
            .iter()
            .map(|v| match v.kind {
                VarKind::Numeric => VarDoc {
                    name: v.name.clone(),
                    kind: "numeric".into(),
                    levels: None,
                    range: Some([v.range.0, v.range.1]),
                },
                VarKind::Categorical => VarDoc {
                    name: v.name.clone(),
                    kind: "categorical".into(),
                    levels: Some(v.levels.clone()),
                    range: None,
                },
            })
            .collect();
        let nodes = t
            .nodes
            .iter()
            .map(|n| match &n.func {
                UnivariateFunction::Curve(c) => NodeDoc {
                    id: n.id,
                    parent: n.parent,
                    var: n.var,
                    kind: "curve".into(),
                    levels: None,
                    knots: Some(c.knots().to_vec()),
                    values: c.values().to_vec(),
                    default: None,
                    influence: n.influence,
                },
                UnivariateFunction::LevelTable(lt) => {
                    let names = &t.variables[n.var].levels;
                    NodeDoc {
                        id: n.id,
                        parent: n.parent,
                        var: n.var,
                        kind: "levels".into(),
                        levels: Some(names.iter().take(lt.values().len()).cloned().collect()),
                        knots: None,
                        values: lt.values().to_vec(),
                        default: Some(lt.default_value()),
                        influence: n.influence,
                    }
                }
            })
            .collect();
        ModelDoc {
            format_version: FORMAT_VERSION,
            b0: t.b0,
            variables,
            nodes,
            train_stats: StatsDoc {
                train_rmse: t.stats.train_rmse,
                test_rmse: t.stats.test_rmse,
                n_nodes: t.stats.n_nodes,
            },
        }
    }

    fn into_tree(self) -> Result<FunctionTree> {
        let mut variables = Vec::with_capacity(self.variables.len());
        for v in self.variables {
            variables.push(match v.kind.as_str() {
                "numeric" => {
                    let r = v
                        .range
                        .ok_or_else(|| Error::Model(format!("numeric variable {} has no range", v.name)))?;
                    Variable::numeric(v.name, (r[0], r[1]))
                }
                "categorical" => {
                    let l = v
                        .levels
                        .ok_or_else(|| Error::Model(format!("categorical variable {} has no levels", v.name)))?;
                    Variable::categorical(v.name, l)
                }
                other => return Err(Error::Model(format!("unknown variable kind {other:?}"))),
            });
        }
        if !self.b0.is_finite() {
            return Err(Error::Model("b0 is not finite".into()));
        }
        let mut tree = FunctionTree::new(variables, self.b0);
        for (k, n) in self.nodes.into_iter().enumerate() {
            if n.id != k + 1 || n.parent >= n.id {
                return Err(Error::Model(format!("node {} is out of order", n.id)));
            }
            let func = match n.kind.as_str() {
                "curve" => {
                    let knots = n
                        .knots
                        .ok_or_else(|| Error::Model(format!("node {} has no knots", n.id)))?;
                    UnivariateFunction::curve(knots, n.values)
                }
                "levels" => UnivariateFunction::level_table(n.values, n.default.unwrap_or(0.0)),
                other => return Err(Error::Model(format!("unknown node kind {other:?}"))),
            }
            .map_err(|e| Error::Model(format!("node {}: {e}", n.id)))?;
            tree.add_node(n.parent, n.var, func)
                .map_err(|e| Error::Model(format!("node {}: {e}", n.id)))?;
            tree.nodes[k].influence = n.influence;
        }
        tree.stats = TrainStats {
            train_rmse: self.train_stats.train_rmse,
            test_rmse: self.train_stats.test_rmse,
            n_nodes: self.train_stats.n_nodes,
        };
        Ok(tree)
    }
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_nodes: usize,
    /// Largest allowed interaction order; 0 means unlimited.
    pub max_order: usize,
    /// No node's path variable set may contain any of these sets.
    pub forbidden: Vec<Vec<usize>>,
    pub numeric_smoother: SmootherSpec,
    pub categorical_smoother: SmootherSpec,
    /// Held-out partition for stopping; `None` grows to `max_nodes`.
    pub split: Option<SplitSpec>,
    pub backfit_passes: usize,
    /// Consecutive additions without test improvement tolerated before stopping.
    pub patience: usize,
    /// Smallest test-MSE decrease counted as an improvement, relative to the
    /// variance of the held-out outcome.
    pub min_improvement: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_nodes: 200,
            max_order: 0,
            forbidden: Vec::new(),
            numeric_smoother: SmootherSpec::new(SmoothMethod::LocalLinear),
            categorical_smoother: SmootherSpec::new(SmoothMethod::CategoricalMean),
            split: Some(SplitSpec::default()),
            backfit_passes: 2,
            patience: 5,
            min_improvement: 1e-6,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.min_improvement >= 0.0) {
            return Err(Error::InvalidArgument("min_improvement must be nonnegative".into()));
        }
        if self.max_nodes == 0 {
            return Err(Error::InvalidArgument("max_nodes must be at least 1".into()));
        }
        self.numeric_smoother.validate()?;
        self.categorical_smoother.validate()?;
        if self.numeric_smoother.method == SmoothMethod::CategoricalMean {
            return Err(Error::InvalidArgument(
                "numeric smoother must be near_neighbor or local_linear".into(),
            ));
        }
        for s in &self.forbidden {
            if s.is_empty() || s.iter().any(|&j| j >= p) {
                return Err(Error::InvalidArgument(
                    "forbidden subsets must be nonempty and index existing variables".into(),
                ));
            }
        }
        Ok(())
    }

    /// Whether a node with this (sorted, distinct) path variable set is allowed.
    pub fn allows(&self, path_vars: &[usize]) -> bool {
        if self.max_order > 0 && path_vars.len() > self.max_order {
            return false;
        }
        !self
            .forbidden
            .iter()
            .any(|s| s.iter().all(|j| path_vars.binary_search(j).is_ok()))
    }
}

/// A scored candidate `(parent node, variable)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub parent: usize,
    pub var: usize,
    /// Training weighted SSE after adding the (optimally scaled) candidate.
    pub sse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceStep {
    Start,
    Addition { node: usize, parent: usize, var: usize },
    Backfit { pass: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub step: TraceStep,
    pub n_nodes: usize,
    pub train_sse: f64,
    pub test_mse: Option<f64>,
}

/// Stateful forward-stepwise fitter.
pub struct Fitter {
    config: FitConfig,
    train: Dataset,
    test: Option<Dataset>,
    axes: Vec<Axis>,
    tree: FunctionTree,
    /// `f_k` at training rows, index `k - 1`.
    fvals: Vec<Vec<f64>>,
    /// `B_k` at training rows, index `k` (index 0 is the root, all ones).
    basis: Vec<Vec<f64>>,
    resid: Vec<f64>,
    path_vars: Vec<Vec<usize>>,
    trace: Vec<TraceEvent>,
}

fn weighted_sse(r: &[f64], v: &[f64]) -> f64 {
    r.iter().zip(v).map(|(r, v)| v * r * r).sum()
}

impl Fitter {
    /// Splits `data`, builds per-variable axes and starts from `b0 = mean(y)`.
    pub fn new(data: &Dataset, config: &FitConfig) -> Result<Self> {
        config.validate(data.n_vars())?;
        if data.n_rows() < 20 {
            return Err(Error::InvalidData(format!(
                "fitting needs at least 20 rows, got {}",
                data.n_rows()
            )));
        }
        let (train, test) = match &config.split {
            Some(s) => {
                let (tr, te) = s.partition(data.n_rows())?;
                (data.select_rows(&tr), Some(data.select_rows(&te)))
            }
            None => (data.clone(), None),
        };
        let axes = train
            .variables
            .iter()
            .enumerate()
            .map(|(j, v)| match v.kind {
                VarKind::Numeric => Axis::numeric(train.column(j)),
                VarKind::Categorical => Ok(Axis::categorical(train.column(j), v.levels.len())),
            })
            .collect::<Result<Vec<_>>>()?;
        let b0 = crate::stats::weighted_mean(&train.outcome, &train.weight);
        let resid = train.outcome.iter().map(|y| y - b0).collect();
        let n = train.n_rows();
        let mut f = Fitter {
            config: config.clone(),
            tree: FunctionTree::new(data.variables.clone(), b0),
            train,
            test,
            axes,
            fvals: Vec::new(),
            basis: vec![vec![1.0; n]],
            resid,
            path_vars: vec![Vec::new()],
            trace: Vec::new(),
        };
        f.record(TraceStep::Start);
        Ok(f)
    }

    /// Continues fitting from an existing tree (used by standalone backfitting).
    pub fn from_tree(tree: &FunctionTree, data: &Dataset, config: &FitConfig) -> Result<Self> {
        tree.check_schema(data)?;
        let cfg = FitConfig {
            split: None,
            ..config.clone()
        };
        let mut f = Fitter::new(data, &cfg)?;
        f.tree = tree.clone();
        f.tree.variables = data.variables.clone();
        f.rebuild_state()?;
        f.trace.clear();
        f.record(TraceStep::Start);
        Ok(f)
    }

    fn rebuild_state(&mut self) -> Result<()> {
        self.fvals = self.tree.node_values(&self.train)?;
        let n = self.train.n_rows();
        self.basis = vec![vec![1.0; n]];
        self.path_vars = vec![Vec::new()];
        for k in 1..=self.tree.n_nodes() {
            let p = self.tree.nodes[k - 1].parent;
            let b: Vec<f64> = self.basis[p].iter().zip(&self.fvals[k - 1]).map(|(a, b)| a * b).collect();
            self.basis.push(b);
            self.path_vars.push(self.tree.path_vars(k));
        }
        self.recompute_resid();
        Ok(())
    }

    fn recompute_resid(&mut self) {
        let b0 = self.tree.b0;
        for (i, r) in self.resid.iter_mut().enumerate() {
            let mut f = b0;
            for b in &self.basis[1..] {
                f += b[i];
            }
            *r = self.train.outcome[i] - f;
        }
    }

    pub fn tree(&self) -> &FunctionTree {
        &self.tree
    }

    pub fn train_data(&self) -> &Dataset {
        &self.train
    }

    pub fn test_data(&self) -> Option<&Dataset> {
        self.test.as_ref()
    }

    pub fn residuals(&self) -> &[f64] {
        &self.resid
    }

    /// `B_k` at the training rows (`k = 0` is the root).
    pub fn basis(&self, k: usize) -> &[f64] {
        &self.basis[k]
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn train_sse(&self) -> f64 {
        weighted_sse(&self.resid, &self.train.weight)
    }

    pub fn test_mse(&self) -> Option<f64> {
        let test = self.test.as_ref()?;
        let pred = self.tree.predict_dataset(test).ok()?;
        let mut s = 0.0;
        let mut sw = 0.0;
        for i in 0..test.n_rows() {
            let e = test.outcome[i] - pred[i];
            s += test.weight[i] * e * e;
            sw += test.weight[i];
        }
        Some(s / sw)
    }

    fn record(&mut self, step: TraceStep) {
        let ev = TraceEvent {
            step,
            n_nodes: self.tree.n_nodes(),
            train_sse: self.train_sse(),
            test_mse: self.test_mse(),
        };
        self.trace.push(ev);
    }

    fn spec_for(&self, var: usize) -> &SmootherSpec {
        match self.train.variables[var].kind {
            VarKind::Numeric => &self.config.numeric_smoother,
            VarKind::Categorical => &self.config.categorical_smoother,
        }
    }

    /// All `(parent, variable)` pairs allowed by the constraints, in id order.
    pub fn candidates(&self) -> Vec<(usize, usize)> {
        let p = self.train.n_vars();
        let mut out = Vec::new();
        let mut set = Vec::new();
        for k in 0..=self.tree.n_nodes() {
            for j in 0..p {
                set.clear();
                set.extend_from_slice(&self.path_vars[k]);
                if let Err(pos) = set.binary_search(&j) {
                    set.insert(pos, j);
                }
                if self.config.allows(&set) {
                    out.push((k, j));
                }
            }
        }
        out
    }

    /// Smooths the residuals against `x_var` with basis weight `B_parent`,
    /// then scales the estimate by the least-squares step. Returns the
    /// scaled function's row values, the function and the SSE reduction.
    fn fit_candidate(
        &self,
        parent: usize,
        var: usize,
        scratch: &mut Scratch,
    ) -> Option<(f64, f64, crate::smoothers::AxisFit)> {
        let w = &self.basis[parent];
        let v = &self.train.weight;
        let axis = &self.axes[var];
        let fit = axis.fit(&self.resid, w, v, self.spec_for(var), scratch).ok()?;
        let mut rows = std::mem::take(&mut scratch.rows);
        rows.resize(axis.len(), 0.0);
        axis.eval_rows(&fit.ordinates, &mut rows);
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..rows.len() {
            let g = w[i] * rows[i];
            a += v[i] * self.resid[i] * g;
            b += v[i] * g * g;
        }
        scratch.rows = rows;
        if !(b > 0.0) || !a.is_finite() {
            return None;
        }
        Some((a * a / b, a / b, fit))
    }

    /// Scores every allowed candidate against the current residuals.
    pub fn score_candidates(&self) -> Vec<Candidate> {
        let sse = self.train_sse();
        self.candidates()
            .par_iter()
            .map_init(Scratch::default, |s, &(parent, var)| {
                self.fit_candidate(parent, var, s).map(|(red, _, _)| Candidate {
                    parent,
                    var,
                    sse: sse - red,
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    /// Adds the best candidate (lowest SSE; ties to lower node id, then
    /// lower variable index). Returns `None` when nothing improves the fit.
    pub fn add_best(&mut self) -> Result<Option<Candidate>> {
        let scores = self.score_candidates();
        let current = self.train_sse();
        let best = scores.iter().copied().fold(None::<Candidate>, |best, c| match best {
            Some(b) if (b.sse, b.parent, b.var) <= (c.sse, c.parent, c.var) => Some(b),
            _ => Some(c),
        });
        let Some(best) = best else { return Ok(None) };
        if !(best.sse < current * (1.0 - 1e-12)) {
            return Ok(None);
        }
        let mut scratch = Scratch::default();
        let (_, beta, fit) = self
            .fit_candidate(best.parent, best.var, &mut scratch)
            .ok_or(Error::NoUsableRows)?;
        let axis = &self.axes[best.var];
        let ordinates: Vec<f64> = fit.ordinates.iter().map(|o| beta * o).collect();
        let mut func = axis.to_function(&ordinates, beta * fit.default);
        let mut fv = vec![0.0; axis.len()];
        axis.eval_rows(&ordinates, &mut fv);
        if best.parent == 0 {
            // A new root child is a leaf: move its mean into b0.
            let m = crate::stats::weighted_mean(&fv, &self.train.weight);
            func = func.shifted(-m);
            fv.iter_mut().for_each(|f| *f -= m);
            self.tree.b0 += m;
            self.resid.iter_mut().for_each(|r| *r -= m);
        }
        let basis: Vec<f64> = self.basis[best.parent].iter().zip(&fv).map(|(a, b)| a * b).collect();
        for (r, b) in self.resid.iter_mut().zip(&basis) {
            *r -= b;
        }
        let id = self.tree.add_node(best.parent, best.var, func)?;
        self.fvals.push(fv);
        self.basis.push(basis);
        self.path_vars.push(self.tree.path_vars(id));
        self.record(TraceStep::Addition {
            node: id,
            parent: best.parent,
            var: best.var,
        });
        Ok(Some(best))
    }

    /// Nodes in the subtree rooted at `k` (including `k`), in increasing id order.
    fn subtree(&self, k: usize) -> Vec<usize> {
        let mut inside = vec![false; self.tree.n_nodes() + 1];
        inside[k] = true;
        let mut out = vec![k];
        for n in &self.tree.nodes[k..] {
            if inside[n.parent] {
                inside[n.id] = true;
                out.push(n.id);
            }
        }
        out
    }

    /// One backfitting sweep over the nodes in id order.
    ///
    /// The model depends on `f_k` through `B_parent(k) · f_k · S_k`, where
    /// `S_k = 1 + Σ_children f_c · S_c` collects the subtree below `k`. Each
    /// node is re-estimated by smoothing the partial residual with weight
    /// `W = B_parent · S_k`; the update is taken along the segment from the
    /// old to the new function at the step length minimizing the training
    /// SSE (clamped to [0, 1]), so the SSE never increases.
    pub fn backfit_pass(&mut self) -> Result<()> {
        let k_max = self.tree.n_nodes();
        if k_max == 0 {
            return Ok(());
        }
        let n = self.train.n_rows();
        let v = self.train.weight.clone();
        let mut scratch = Scratch::default();
        let mut partial = vec![0.0; n];
        let mut wk = vec![0.0; n];
        let mut newv = vec![0.0; n];
        for k in 1..=k_max {
            let node_var = self.tree.nodes[k - 1].var;
            let parent = self.tree.nodes[k - 1].parent;

            // S over the subtree, deepest first.
            let sub = self.subtree(k);
            let mut s_of: Vec<Option<Vec<f64>>> = vec![None; k_max + 1];
            for &d in sub.iter().rev() {
                let mut s = vec![1.0; n];
                for &c in &sub {
                    if c > d && self.tree.nodes[c - 1].parent == d {
                        let sc = s_of[c].as_ref().expect("child processed first");
                        let fc = &self.fvals[c - 1];
                        for i in 0..n {
                            s[i] += fc[i] * sc[i];
                        }
                    }
                }
                s_of[d] = Some(s);
            }
            let sk = s_of[k].take().expect("subtree root");
            let old = &self.fvals[k - 1];
            for i in 0..n {
                wk[i] = self.basis[parent][i] * sk[i];
                partial[i] = self.resid[i] + wk[i] * old[i];
            }
            if w_floor(&wk, &v) == 0.0 {
                continue;
            }
            let axis = &self.axes[node_var];
            let fit = match axis.fit(&partial, &wk, &v, self.spec_for(node_var), &mut scratch) {
                Ok(f) => f,
                Err(Error::NoUsableRows) => continue,
                Err(e) => return Err(e),
            };
            let target = axis.to_function(&fit.ordinates, fit.default);
            let old_func = self.tree.nodes[k - 1].func.clone();
            for (i, x) in self.train.column(node_var).iter().enumerate() {
                newv[i] = target.eval(*x);
            }
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..n {
                let g = wk[i] * (newv[i] - old[i]);
                a += v[i] * self.resid[i] * g;
                b += v[i] * g * g;
            }
            if !(b > 0.0) || !(a > 0.0) {
                continue;
            }
            let t = (a / b).min(1.0);
            let mut func = old_func.lerp(&target, t)?;
            let mut fv: Vec<f64> = self.train.column(node_var).iter().map(|&x| func.eval(x)).collect();
            let mut shift = 0.0;
            if parent == 0 && sub.len() == 1 {
                shift = crate::stats::weighted_mean(&fv, &v);
                func = func.shifted(-shift);
                fv.iter_mut().for_each(|f| *f -= shift);
            }
            for i in 0..n {
                self.resid[i] -= wk[i] * (fv[i] - old[i]) + shift;
            }
            self.tree.b0 += shift;
            self.tree.set_func(k, func);
            self.fvals[k - 1] = fv;
            for &d in &sub {
                let p = self.tree.nodes[d - 1].parent;
                let (head, tail) = self.basis.split_at_mut(d);
                for ((b, &pb), &f) in tail[0].iter_mut().zip(&head[p]).zip(&self.fvals[d - 1]) {
                    *b = pb * f;
                }
            }
        }
        let m = crate::stats::weighted_mean(&self.resid, &v);
        self.tree.b0 += m;
        self.resid.iter_mut().for_each(|r| *r -= m);
        let pass = self.trace.iter().filter(|e| matches!(e.step, TraceStep::Backfit { .. })).count();
        self.record(TraceStep::Backfit { pass: pass + 1 });
        Ok(())
    }

    /// Runs the full stepwise loop and returns the best-test snapshot.
    pub fn run(mut self) -> Result<FunctionTree> {
        let constant_y = self.train.outcome.iter().all(|&y| y == self.train.outcome[0]);
        if constant_y {
            log::warn!("outcome is constant; returning a root-only tree");
            return self.finish(None);
        }
        let tol = self.test.as_ref().map_or(0.0, |t| {
            self.config.min_improvement * crate::stats::weighted_var(&t.outcome, &t.weight)
        });
        let mut best: Option<(f64, FunctionTree)> = self.test_mse().map(|m| (m, self.tree.clone()));
        let mut since = 0usize;
        while self.tree.n_nodes() < self.config.max_nodes {
            match self.add_best()? {
                None => break,
                Some(c) => log::debug!("node {} on x{} under {}", self.tree.n_nodes(), c.var + 1, c.parent),
            }
            for _ in 0..self.config.backfit_passes {
                self.backfit_pass()?;
            }
            if let Some(mse) = self.test_mse() {
                match &best {
                    Some((b, _)) if mse >= *b - tol => {
                        since += 1;
                        if since > self.config.patience {
                            break;
                        }
                    }
                    _ => {
                        best = Some((mse, self.tree.clone()));
                        since = 0;
                    }
                }
            }
            log::info!(
                "nodes {:3}  train sse {:.6e}  test mse {}",
                self.tree.n_nodes(),
                self.train_sse(),
                self.test_mse().map_or("-".into(), |m| format!("{m:.6e}"))
            );
        }
        let snapshot = best.map(|(_, t)| t);
        self.finish(snapshot)
    }

    fn finish(self, snapshot: Option<FunctionTree>) -> Result<FunctionTree> {
        let mut tree = snapshot.unwrap_or(self.tree);
        tree.set_influences(&self.train)?;
        let pred = tree.predict_dataset(&self.train)?;
        let train_rmse = dataset::rmse(&self.train.outcome, &pred).unwrap_or(0.0);
        let test_rmse = match &self.test {
            Some(t) => {
                let p = tree.predict_dataset(t)?;
                dataset::rmse(&t.outcome, &p).ok()
            }
            None => None,
        };
        tree.stats = TrainStats {
            train_rmse,
            test_rmse,
            n_nodes: tree.n_nodes(),
        };
        Ok(tree)
    }
}

/// Fits a function tree by forward stepwise best-first construction with
/// backfitting and test-sample early stopping.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<FunctionTree> {
    Fitter::new(data, config)?.run()
}

/// One backfitting pass of an existing tree against `data` (all rows used).
pub fn backfit_pass(tree: &FunctionTree, data: &Dataset, config: &FitConfig) -> Result<FunctionTree> {
    let mut f = Fitter::from_tree(tree, data, config)?;
    f.backfit_pass()?;
    let mut t = f.tree.clone();
    t.set_influences(data)?;
    t.stats = tree.stats;
    Ok(t)
}

/// `B_k(x_i)` for every node; see [`FunctionTree::basis_values`].
pub fn basis_values(tree: &FunctionTree, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    tree.basis_values(data)
}

pub fn interaction_order(tree: &FunctionTree, node_id: usize) -> Result<usize> {
    tree.interaction_order(node_id)
}

pub fn predict(tree: &FunctionTree, x: &[f64]) -> f64 {
    tree.predict(x)
}
