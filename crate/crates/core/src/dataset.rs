//! Data ingestion, variable typing, train/test partitioning, the two
//! synthetic generators used throughout the test suite, and fit metrics.
//!
//! A [`Dataset`] is stored column-major: every cell is an `f64`, holding
//! either a numeric value or, for categorical variables, the index of the
//! level in [`Variable::levels`].

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::stats::{self, rng_stream};

/// Name of the hidden noiseless-target column in generated data files.
pub const TRUTH_COLUMN: &str = "__truth__";
/// Name of the optional row-weight column.
pub const WEIGHT_COLUMN: &str = "__weight__";

const MISSING_TOKENS: &[&str] = &["", "NA", "N/A", "NaN", "nan", "null"];

const SPLIT_STREAM: u64 = 0x5EED_0001;
const SUBSAMPLE_STREAM: u64 = 0x5EED_0002;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// Level names, categorical only.
    pub levels: Vec<String>,
    /// Observed (min, max), numeric only.
    pub range: (f64, f64),
}

impl Variable {
    pub fn numeric(name: impl Into<String>, range: (f64, f64)) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Numeric,
            levels: Vec::new(),
            range,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Categorical,
            levels,
            range: (0.0, 0.0),
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == VarKind::Categorical
    }

    /// Same name and kind, and (categorical) the same leading level list.
    pub fn compatible_with(&self, other: &Variable) -> bool {
        if self.name != other.name || self.kind != other.kind {
            return false;
        }
        match self.kind {
            VarKind::Numeric => true,
            VarKind::Categorical => {
                let n = self.levels.len().min(other.levels.len());
                self.levels[..n] == other.levels[..n]
            }
        }
    }
}

/// Column-typed observation matrix with outcome values and row weights.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub variables: Vec<Variable>,
    columns: Vec<Vec<f64>>,
    pub target: String,
    pub outcome: Vec<f64>,
    pub weight: Vec<f64>,
    /// Noiseless target, present for generated data.
    pub truth: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset with unit weights, validating every invariant.
    pub fn new(
        variables: Vec<Variable>,
        columns: Vec<Vec<f64>>,
        target: impl Into<String>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        let n = outcome.len();
        Self::with_weights(variables, columns, target, outcome, vec![1.0; n], None)
    }

    pub fn with_weights(
        variables: Vec<Variable>,
        columns: Vec<Vec<f64>>,
        target: impl Into<String>,
        outcome: Vec<f64>,
        weight: Vec<f64>,
        truth: Option<Vec<f64>>,
    ) -> Result<Self> {
        let ds = Dataset {
            variables,
            columns,
            target: target.into(),
            outcome,
            weight,
            truth,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.outcome.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, got {n}")));
        }
        if self.variables.is_empty() {
            return Err(Error::InvalidData("need at least one predictor".into()));
        }
        if self.columns.len() != self.variables.len() {
            return Err(Error::InvalidData(format!(
                "{} columns for {} variables",
                self.columns.len(),
                self.variables.len()
            )));
        }
        if self.weight.len() != n {
            return Err(Error::InvalidData("weight length differs from outcome".into()));
        }
        if let Some(t) = &self.truth {
            if t.len() != n {
                return Err(Error::InvalidData("truth length differs from outcome".into()));
            }
        }
        if self.outcome.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite outcome value".into()));
        }
        if self.weight.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidData("weights must be finite and nonnegative".into()));
        }
        if self.weight.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidData("all weights are zero".into()));
        }
        for (var, col) in self.variables.iter().zip(&self.columns) {
            if col.len() != n {
                return Err(Error::InvalidData(format!(
                    "column {} has {} rows, expected {n}",
                    var.name,
                    col.len()
                )));
            }
            match var.kind {
                VarKind::Numeric => {
                    if col.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidData(format!(
                            "non-finite value in column {}",
                            var.name
                        )));
                    }
                    if var.range.0 > var.range.1 {
                        return Err(Error::InvalidData(format!(
                            "inverted range for column {}",
                            var.name
                        )));
                    }
                }
                VarKind::Categorical => {
                    let l = var.levels.len();
                    let ok = col
                        .iter()
                        .all(|&v| v >= 0.0 && v.fract() == 0.0 && (v as usize) < l);
                    if !ok {
                        return Err(Error::InvalidData(format!(
                            "categorical column {} has an invalid level index",
                            var.name
                        )));
                    }
                    let mut seen = std::collections::HashSet::new();
                    if !var.levels.iter().all(|lv| seen.insert(lv)) {
                        return Err(Error::InvalidData(format!(
                            "duplicate level in column {}",
                            var.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.outcome.len()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn value(&self, row: usize, var: usize) -> f64 {
        self.columns[var][row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn fill_row(&self, i: usize, buf: &mut [f64]) {
        for (b, c) in buf.iter_mut().zip(&self.columns) {
            *b = c[i];
        }
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Row-selected copy; indices may repeat (bootstrap resamples).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Dataset {
            variables: self.variables.clone(),
            columns: self.columns.iter().map(|c| pick(c)).collect(),
            target: self.target.clone(),
            outcome: pick(&self.outcome),
            weight: pick(&self.weight),
            truth: self.truth.as_deref().map(pick),
        }
    }

    /// Deterministic random subsample of at most `n` rows, in original order.
    pub fn subsample(&self, n: usize, seed: u64) -> Dataset {
        if n >= self.n_rows() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.n_rows()).collect();
        idx.shuffle(&mut rng_stream(seed, SUBSAMPLE_STREAM));
        let mut keep = idx[..n.max(2)].to_vec();
        keep.sort_unstable();
        self.select_rows(&keep)
    }

    /// Replaces the outcome vector (global-surrogate workflow).
    pub fn with_outcome(&self, name: impl Into<String>, outcome: Vec<f64>) -> Result<Dataset> {
        if outcome.len() != self.n_rows() {
            return Err(Error::InvalidArgument("outcome length differs from row count".into()));
        }
        let mut ds = self.clone();
        ds.target = name.into();
        ds.outcome = outcome;
        ds.validate()?;
        Ok(ds)
    }

    /// Drops the named predictor columns.
    pub fn without_columns(&self, names: &[String]) -> Result<Dataset> {
        for n in names {
            if self.var_index(n).is_none() {
                return Err(Error::ColumnNotFound(n.clone()));
            }
        }
        let mut ds = self.clone();
        let keep: Vec<usize> = (0..self.n_vars())
            .filter(|&j| !names.contains(&self.variables[j].name))
            .collect();
        ds.variables = keep.iter().map(|&j| self.variables[j].clone()).collect();
        ds.columns = keep.iter().map(|&j| self.columns[j].clone()).collect();
        ds.validate()?;
        Ok(ds)
    }

    /// Promotes a predictor column to the outcome, removing it from the predictors.
    pub fn promote_to_outcome(&self, name: &str) -> Result<Dataset> {
        let j = self
            .var_index(name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))?;
        if self.variables[j].is_categorical() {
            return Err(Error::InvalidArgument(format!(
                "column {name} is categorical and cannot be an outcome"
            )));
        }
        let outcome = self.columns[j].clone();
        self.without_columns(&[name.to_string()])?
            .with_outcome(name, outcome)
    }
}

/// Deterministic train/test partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    /// Returns `(train, test)` row indices, each sorted ascending.
    pub fn partition(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "test fraction {} not in (0, 1)",
                self.test_fraction
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgument("cannot split fewer than 2 rows".into()));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_stream(self.seed, SPLIT_STREAM));
        let n_test = ((self.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut test = idx[..n_test].to_vec();
        let mut train = idx[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Ok((train, test))
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub target: String,
    pub categorical_override: Vec<String>,
    /// Numeric columns with at most this many distinct values become categorical.
    pub categorical_threshold: usize,
    /// Row-weight column; defaults to [`WEIGHT_COLUMN`] when present.
    pub weight: Option<String>,
    /// Columns ignored entirely.
    pub exclude: Vec<String>,
}

impl LoadOptions {
    pub fn new(target: impl Into<String>) -> Self {
        LoadOptions {
            target: target.into(),
            categorical_override: Vec::new(),
            categorical_threshold: 10,
            weight: None,
            exclude: Vec::new(),
        }
    }
}

struct RawTable {
    headers: Vec<String>,
    cells: Vec<Vec<String>>, // column-major
}

fn read_raw(path: &Path) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cells = vec![Vec::new(); headers.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            cells[j].push(field.to_string());
        }
    }
    Ok(RawTable { headers, cells })
}

fn is_missing(tok: &str) -> bool {
    MISSING_TOKENS.contains(&tok)
}

fn parse_real(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn numeric_column(name: &str, toks: &[String]) -> Result<Vec<f64>> {
    toks.iter()
        .enumerate()
        .map(|(i, t)| {
            if is_missing(t) {
                return Err(Error::MissingValue {
                    column: name.to_string(),
                    row: i + 1,
                });
            }
            parse_real(t).ok_or_else(|| Error::Unparseable {
                column: name.to_string(),
                row: i + 1,
                value: t.clone(),
            })
        })
        .collect()
}

fn ordered_levels(toks: &[String]) -> Vec<String> {
    if toks.iter().all(|t| parse_real(t).is_some()) {
        let mut by_value: BTreeMap<u64, (f64, String)> = BTreeMap::new();
        for t in toks {
            let v = parse_real(t).unwrap();
            by_value.entry(v.to_bits()).or_insert((v, t.clone()));
        }
        let mut lv: Vec<(f64, String)> = by_value.into_values().collect();
        lv.sort_by(|a, b| a.0.total_cmp(&b.0));
        lv.into_iter().map(|(_, s)| s).collect()
    } else {
        let mut lv: Vec<String> = toks.to_vec();
        lv.sort();
        lv.dedup();
        lv
    }
}

fn level_codes(name: &str, toks: &[String], levels: &[String]) -> Result<Vec<f64>> {
    let index: HashMap<&str, usize> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let numeric_levels: Option<Vec<f64>> = levels.iter().map(|l| parse_real(l)).collect();
    toks.iter()
        .enumerate()
        .map(|(i, t)| {
            if let Some(&k) = index.get(t.as_str()) {
                return Ok(k as f64);
            }
            if let (Some(nl), Some(v)) = (&numeric_levels, parse_real(t)) {
                if let Some(k) = nl.iter().position(|&x| x == v) {
                    return Ok(k as f64);
                }
            }
            Err(Error::Unparseable {
                column: name.to_string(),
                row: i + 1,
                value: t.clone(),
            })
        })
        .collect()
}

/// Loads a CSV file, inferring each predictor's type.
pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    let find = |name: &str| raw.headers.iter().position(|h| h == name);
    let target_idx = find(&opts.target).ok_or_else(|| Error::TargetNotFound(opts.target.clone()))?;
    for name in opts.categorical_override.iter().chain(&opts.exclude) {
        if find(name).is_none() {
            return Err(Error::ColumnNotFound(name.clone()));
        }
    }
    let weight_idx = match &opts.weight {
        Some(w) => Some(find(w).ok_or_else(|| Error::ColumnNotFound(w.clone()))?),
        None => find(WEIGHT_COLUMN),
    };
    let truth_idx = find(TRUTH_COLUMN);

    let outcome = numeric_column(&opts.target, &raw.cells[target_idx])?;
    let n = outcome.len();
    let weight = match weight_idx {
        Some(k) => numeric_column(&raw.headers[k], &raw.cells[k])?,
        None => vec![1.0; n],
    };
    let truth = truth_idx
        .map(|k| numeric_column(TRUTH_COLUMN, &raw.cells[k]))
        .transpose()?;

    let mut variables = Vec::new();
    let mut columns = Vec::new();
    for (j, name) in raw.headers.iter().enumerate() {
        if j == target_idx
            || Some(j) == weight_idx
            || Some(j) == truth_idx
            || opts.exclude.contains(name)
        {
            continue;
        }
        let toks = &raw.cells[j];
        if let Some(i) = toks.iter().position(|t| is_missing(t)) {
            return Err(Error::MissingValue {
                column: name.clone(),
                row: i + 1,
            });
        }
        let all_numeric = toks.iter().all(|t| parse_real(t).is_some());
        let forced = opts.categorical_override.contains(name);
        let distinct = if all_numeric {
            let mut v: Vec<u64> = toks.iter().map(|t| parse_real(t).unwrap().to_bits()).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        } else {
            ordered_levels(toks).len()
        };
        if distinct <= 1 {
            log::warn!("column {name} has a single distinct value; dropped");
            continue;
        }
        if all_numeric && !forced && distinct > opts.categorical_threshold {
            let col = numeric_column(name, toks)?;
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            variables.push(Variable::numeric(name.clone(), (lo, hi)));
            columns.push(col);
        } else {
            let levels = ordered_levels(toks);
            let codes = level_codes(name, toks, &levels)?;
            variables.push(Variable::categorical(name.clone(), levels));
            columns.push(codes);
        }
    }
    Dataset::with_weights(variables, columns, opts.target.clone(), outcome, weight, truth)
}

/// Loads a CSV against a fixed variable schema (e.g. a fitted model's).
///
/// Columns not in the schema are ignored. Categorical tokens not in the
/// schema's level list are appended as new levels, so downstream models
/// treat them as unseen. Without a target the outcome is all zeros.
pub fn load_csv_with_schema(
    path: impl AsRef<Path>,
    schema: &[Variable],
    target: Option<&str>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    let find = |name: &str| raw.headers.iter().position(|h| h == name);
    let n = raw.cells.first().map_or(0, Vec::len);

    let mut variables = Vec::with_capacity(schema.len());
    let mut columns = Vec::with_capacity(schema.len());
    for var in schema {
        let j = find(&var.name).ok_or_else(|| {
            Error::SchemaMismatch(format!("column {} required by the model is absent", var.name))
        })?;
        let toks = &raw.cells[j];
        match var.kind {
            VarKind::Numeric => {
                columns.push(numeric_column(&var.name, toks)?);
                variables.push(var.clone());
            }
            VarKind::Categorical => {
                let mut v = var.clone();
                if let Some(i) = toks.iter().position(|t| is_missing(t)) {
                    return Err(Error::MissingValue {
                        column: var.name.clone(),
                        row: i + 1,
                    });
                }
                let numeric_levels: Option<Vec<f64>> =
                    v.levels.iter().map(|l| parse_real(l)).collect();
                let mut codes = Vec::with_capacity(toks.len());
                for t in toks {
                    let known = v.levels.iter().position(|l| l == t).or_else(|| {
                        let x = parse_real(t)?;
                        numeric_levels.as_ref()?.iter().position(|&l| l == x)
                    });
                    let k = match known {
                        Some(k) => k,
                        None => {
                            log::warn!("column {}: unseen level {t:?}", var.name);
                            v.levels.push(t.clone());
                            v.levels.len() - 1
                        }
                    };
                    codes.push(k as f64);
                }
                columns.push(codes);
                variables.push(v);
            }
        }
    }
    let (target_name, outcome) = match target {
        Some(t) => {
            let j = find(t).ok_or_else(|| Error::TargetNotFound(t.to_string()))?;
            (t.to_string(), numeric_column(t, &raw.cells[j])?)
        }
        None => (String::new(), vec![0.0; n]),
    };
    let weight = match find(WEIGHT_COLUMN) {
        Some(k) => numeric_column(WEIGHT_COLUMN, &raw.cells[k])?,
        None => vec![1.0; n],
    };
    let truth = find(TRUTH_COLUMN)
        .map(|k| numeric_column(TRUTH_COLUMN, &raw.cells[k]))
        .transpose()?;
    Dataset::with_weights(variables, columns, target_name, outcome, weight, truth)
}

/// Formats a real with 17 significant digits (exact `f64` round trip).
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes predictors, outcome, then weight and truth columns when relevant.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv_with_extra(ds, &[], path)
}

/// As [`write_csv`], with extra named real columns appended.
pub fn write_csv_with_extra(
    ds: &Dataset,
    extra: &[(&str, &[f64])],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let unit_weights = ds.weight.iter().all(|&w| w == 1.0);
    let mut header: Vec<&str> = ds.variables.iter().map(|v| v.name.as_str()).collect();
    if !ds.target.is_empty() {
        header.push(&ds.target);
    }
    if !unit_weights {
        header.push(WEIGHT_COLUMN);
    }
    if ds.truth.is_some() {
        header.push(TRUTH_COLUMN);
    }
    header.extend(extra.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for i in 0..ds.n_rows() {
        rec.clear();
        for (var, col) in ds.variables.iter().zip(&ds.columns) {
            rec.push(match var.kind {
                VarKind::Numeric => fmt_real(col[i]),
                VarKind::Categorical => var.levels[col[i] as usize].clone(),
            });
        }
        if !ds.target.is_empty() {
            rec.push(fmt_real(ds.outcome[i]));
        }
        if !unit_weights {
            rec.push(fmt_real(ds.weight[i]));
        }
        if let Some(t) = &ds.truth {
            rec.push(fmt_real(t[i]));
        }
        for (_, vals) in extra {
            rec.push(fmt_real(vals[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

/// Target of the eight-variable benchmark: an additive quadratic, two
/// separate two-variable interactions and a trilinear three-variable one.
pub fn friedman_target(x: &[f64]) -> f64 {
    4.0 * (PI * x[0]).sin() * (PI * x[1]).cos()
        + 7.0 * x[2] * x[2]
        + 15.0 * (x[3] + 0.4) * (x[4] - 0.6) * (x[5] + 0.2)
        + 5.0 * (PI * (x[6] + 0.1) * x[7]).sin()
}

/// Ten-variable target with interactions of up to three variables.
pub fn hu_target(x: &[f64]) -> f64 {
    let ind = |v: f64| if v > 0.0 { 1.0 } else { 0.0 };
    let mut g: f64 = x[..5].iter().sum();
    g += 0.5 * x[5..8].iter().map(|v| v * v).sum::<f64>();
    g += x[8] * ind(x[8]) + x[9] * ind(x[9]);
    g += x[0] * x[1] + x[0] * x[2] + x[1] * x[2] + 0.5 * x[0] * x[1] * x[2];
    g += x[3] * x[4] + x[3] * x[5] + x[4] * x[5] + 0.5 * ind(x[3]) * x[4] * x[5];
    g
}

const GEN_X_STREAM: u64 = 1;
const GEN_NOISE_STREAM: u64 = 2;

fn named(prefix: &str, p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("{prefix}{j}")).collect()
}

fn numeric_vars(names: Vec<String>, columns: &[Vec<f64>]) -> Vec<Variable> {
    names
        .into_iter()
        .zip(columns)
        .map(|(n, c)| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Variable::numeric(n, (lo, hi))
        })
        .collect()
}

/// Eight independent Gaussian predictors with standard deviation `sd_x`,
/// outcome `friedman_target(x) + noise` with noise variance `var(F)/snr²`.
/// `snr = f64::INFINITY` gives noiseless outcomes.
pub fn gen_friedman(n: usize, seed: u64, sd_x: f64, snr: f64) -> Result<Dataset> {
    if n < 2 || !(sd_x > 0.0) || !(snr > 0.0) {
        return Err(Error::InvalidArgument(
            "gen_friedman needs n >= 2, sd_x > 0, snr > 0".into(),
        ));
    }
    const P: usize = 8;
    let mut rng = rng_stream(seed, GEN_X_STREAM);
    let mut columns = vec![Vec::with_capacity(n); P];
    let mut truth = Vec::with_capacity(n);
    let mut row = [0.0; P];
    for _ in 0..n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = sd_x * rng.sample::<f64, _>(StandardNormal);
            columns[j].push(*r);
        }
        truth.push(friedman_target(&row));
    }
    let noise_sd = if snr.is_infinite() {
        0.0
    } else {
        let m = stats::mean(&truth);
        let var = truth.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / n as f64;
        var.sqrt() / snr
    };
    let mut nrng = rng_stream(seed, GEN_NOISE_STREAM);
    let outcome: Vec<f64> = truth
        .iter()
        .map(|t| t + noise_sd * nrng.sample::<f64, _>(StandardNormal))
        .collect();
    let vars = numeric_vars(named("x", P), &columns);
    Dataset::with_weights(vars, columns, "y", outcome, vec![1.0; n], Some(truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HuMode {
    Regression,
    Classification,
}

/// Thirty predictors in two independent equicorrelated (ρ = 0.5) Gaussian
/// blocks of 20 and 10, clipped to [−2.5, 2.5]. Regression adds N(0, 0.5²)
/// noise to `hu_target`; classification draws y ~ Bernoulli(σ(g)).
pub fn gen_hu(n: usize, seed: u64, mode: HuMode) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument("gen_hu needs n >= 2".into()));
    }
    const P: usize = 30;
    const BLOCKS: [(usize, usize); 2] = [(0, 20), (20, 30)];
    let half = 0.5f64.sqrt();
    let mut rng = rng_stream(seed, GEN_X_STREAM);
    let mut columns = vec![Vec::with_capacity(n); P];
    let mut truth = Vec::with_capacity(n);
    let mut row = [0.0; P];
    for _ in 0..n {
        for (lo, hi) in BLOCKS {
            let common: f64 = rng.sample(StandardNormal);
            for r in &mut row[lo..hi] {
                let own: f64 = rng.sample(StandardNormal);
                *r = (half * common + half * own).clamp(-2.5, 2.5);
            }
        }
        for (c, &r) in columns.iter_mut().zip(&row) {
            c.push(r);
        }
        truth.push(hu_target(&row));
    }
    let mut nrng = rng_stream(seed, GEN_NOISE_STREAM);
    let outcome: Vec<f64> = match mode {
        HuMode::Regression => truth
            .iter()
            .map(|g| g + 0.5 * nrng.sample::<f64, _>(StandardNormal))
            .collect(),
        HuMode::Classification => truth
            .iter()
            .map(|g| {
                let p = 1.0 / (1.0 + (-g).exp());
                if nrng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
    };
    let vars = numeric_vars(named("x", P), &columns);
    Dataset::with_weights(vars, columns, "y", outcome, vec![1.0; n], Some(truth))
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Prediction error normalized by the total variation of `actual` about its mean.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() || actual.len() < 2 {
        return Err(Error::InvalidArgument(
            "rmse needs equal-length vectors with at least 2 values".into(),
        ));
    }
    let m = stats::mean(actual);
    let den: f64 = actual.iter().map(|a| (a - m) * (a - m)).sum();
    if den == 0.0 {
        return Err(Error::Degenerate("actual values are constant".into()));
    }
    let num: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok((num / den).sqrt())
}

/// Fidelity to a noiseless target: `sqrt(mean((g − ĝ)²) / var(g))`, with the
/// population (1/N) variance, so predicting the mean gives exactly 1.
pub fn rmse_target(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    // Same ratio as `rmse`; the 1/N factors cancel.
    rmse(truth, predicted)
}
