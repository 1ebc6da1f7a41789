//! Weighted univariate conditional-expectation estimators.
//!
//! Every smoother estimates `E_{w²}[r / w | x]`: the `w²`-weighted mean of
//! `r / w` given `x`. Rows with `|w|` below a small floor are excluded. Numeric
//! smoothers work on rank windows around a fixed set of knots (the distinct
//! sorted `x` values, thinned to at most [`MAX_KNOTS`]), so a fit costs two
//! linear passes once the sort order is known. The tree fitter keeps one
//! [`Axis`] per predictor and calls [`Axis::fit`] for every candidate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Upper bound on knots in a fitted numeric curve.
pub const MAX_KNOTS: usize = 500;
/// Rows with `|w| < W_FLOOR_REL · rms(w)` are excluded from a fit.
pub const W_FLOOR_REL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Univariate functions
// ---------------------------------------------------------------------------

/// Piecewise-linear curve with constant extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::InvalidArgument(
                "curve needs at least one knot and one value per knot".into(),
            ));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("curve knots and values must be finite".into()));
        }
        if knots.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidArgument("curve knots must be strictly increasing".into()));
        }
        Ok(Curve { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        let n = k.len();
        if x.is_nan() || x <= k[0] {
            return self.values[0];
        }
        if x >= k[n - 1] {
            return self.values[n - 1];
        }
        let hi = k.partition_point(|&t| t <= x);
        let lo = hi - 1;
        let t = (x - k[lo]) / (k[hi] - k[lo]);
        self.values[lo] + t * (self.values[hi] - self.values[lo])
    }
}

/// Per-level values, with a fallback for levels not seen in training.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTable {
    values: Vec<f64>,
    default: f64,
}

impl LevelTable {
    pub fn new(values: Vec<f64>, default: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) || !default.is_finite() {
            return Err(Error::InvalidArgument("level table values must be finite".into()));
        }
        Ok(LevelTable { values, default })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn default_value(&self) -> f64 {
        self.default
    }

    pub fn eval(&self, code: f64) -> f64 {
        if code >= 0.0 && code.fract() == 0.0 {
            if let Some(v) = self.values.get(code as usize) {
                return *v;
            }
        }
        self.default
    }
}

/// A single-variable function in evaluable form. Evaluation is total.
#[derive(Debug, Clone, PartialEq)]
pub enum UnivariateFunction {
    LevelTable(LevelTable),
    Curve(Curve),
}

impl UnivariateFunction {
    pub fn constant(c: f64) -> Self {
        UnivariateFunction::Curve(Curve {
            knots: vec![0.0],
            values: vec![c],
        })
    }

    pub fn curve(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Curve::new(knots, values).map(UnivariateFunction::Curve)
    }

    pub fn level_table(values: Vec<f64>, default: f64) -> Result<Self> {
        LevelTable::new(values, default).map(UnivariateFunction::LevelTable)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            UnivariateFunction::Curve(c) => c.eval(x),
            UnivariateFunction::LevelTable(t) => t.eval(x),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, UnivariateFunction::LevelTable(_))
    }

    /// True when every evaluation returns the same value.
    pub fn is_constant(&self) -> bool {
        let (vals, extra) = match self {
            UnivariateFunction::Curve(c) => (&c.values, None),
            UnivariateFunction::LevelTable(t) => (&t.values, Some(t.default)),
        };
        let first = vals.first().copied().or(extra).unwrap_or(0.0);
        vals.iter().chain(extra.iter()).all(|&v| v == first)
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        match self {
            UnivariateFunction::Curve(c) => UnivariateFunction::Curve(Curve {
                knots: c.knots.clone(),
                values: c.values.iter().map(|&v| f(v)).collect(),
            }),
            UnivariateFunction::LevelTable(t) => UnivariateFunction::LevelTable(LevelTable {
                values: t.values.iter().map(|&v| f(v)).collect(),
                default: f(t.default),
            }),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map_values(|v| c * v)
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map_values(|v| v + c)
    }

    /// `(1 − t)·self + t·other`, exact for both variants. Curves are merged
    /// on the union of their knots.
    pub fn lerp(&self, other: &UnivariateFunction, t: f64) -> Result<Self> {
        let mix = |a: f64, b: f64| a + t * (b - a);
        match (self, other) {
            (UnivariateFunction::Curve(a), UnivariateFunction::Curve(b)) => {
                if a.knots == b.knots {
                    let values = a.values.iter().zip(&b.values).map(|(&x, &y)| mix(x, y)).collect();
                    return Ok(UnivariateFunction::Curve(Curve {
                        knots: a.knots.clone(),
                        values,
                    }));
                }
                let mut knots: Vec<f64> = a.knots.iter().chain(&b.knots).copied().collect();
                knots.sort_by(f64::total_cmp);
                knots.dedup();
                let values = knots.iter().map(|&k| mix(a.eval(k), b.eval(k))).collect();
                Ok(UnivariateFunction::Curve(Curve { knots, values }))
            }
            (UnivariateFunction::LevelTable(a), UnivariateFunction::LevelTable(b)) => {
                let n = a.values.len().max(b.values.len());
                let values = (0..n)
                    .map(|i| mix(a.eval(i as f64), b.eval(i as f64)))
                    .collect();
                Ok(UnivariateFunction::LevelTable(LevelTable {
                    values,
                    default: mix(a.default, b.default),
                }))
            }
            _ => Err(Error::InvalidArgument(
                "cannot combine a level table with a curve".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Smoother configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothMethod {
    CategoricalMean,
    NearNeighbor,
    LocalLinear,
}

impl SmoothMethod {
    pub fn default_span(self) -> f64 {
        match self {
            SmoothMethod::NearNeighbor => 0.1,
            SmoothMethod::LocalLinear => 0.2,
            SmoothMethod::CategoricalMean => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherSpec {
    pub method: SmoothMethod,
    /// Fraction of the (included) observations in each neighborhood.
    pub span: f64,
    /// Minimum observations per level or neighborhood.
    pub min_count: usize,
}

impl SmootherSpec {
    pub fn new(method: SmoothMethod) -> Self {
        SmootherSpec {
            method,
            span: method.default_span(),
            min_count: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(Error::InvalidArgument(format!("span {} not in (0, 1]", self.span)));
        }
        if self.min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Output of [`smooth`]: a centered function plus the constant removed from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFit {
    pub function: UnivariateFunction,
    /// `w²`-weighted mean of the uncentered estimate over the included rows.
    pub offset: f64,
}

impl SmoothFit {
    pub fn uncentered(&self) -> UnivariateFunction {
        self.function.shifted(self.offset)
    }
}

/// Estimates `E_{w²}[r / w | x]` and centers the result.
///
/// `x` holds numeric values, or level indices when `spec.method` is
/// [`SmoothMethod::CategoricalMean`].
pub fn smooth(x: &[f64], r: &[f64], w: &[f64], spec: &SmootherSpec) -> Result<SmoothFit> {
    let n = x.len();
    if r.len() != n || w.len() != n {
        return Err(Error::InvalidArgument("x, r and w must have equal lengths".into()));
    }
    if x.iter().chain(r).chain(w).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("smoother inputs must be finite".into()));
    }
    spec.validate()?;
    let axis = match spec.method {
        SmoothMethod::CategoricalMean => {
            if x.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
                return Err(Error::InvalidArgument("level indices must be nonnegative integers".into()));
            }
            let levels = x.iter().fold(0.0f64, |m, &v| m.max(v)) as usize + 1;
            Axis::categorical(x, levels)
        }
        _ => Axis::numeric(x)?,
    };
    let ones = vec![1.0; n];
    let mut scratch = Scratch::default();
    let fit = axis.fit(r, w, &ones, spec, &mut scratch)?;
    let mut vals = vec![0.0; n];
    axis.eval_rows(&fit.ordinates, &mut vals);
    let (mut sw, mut swf) = (0.0, 0.0);
    let floor = w_floor(w, &ones);
    for i in 0..n {
        if w[i].abs() >= floor {
            let ww = w[i] * w[i];
            sw += ww;
            swf += ww * vals[i];
        }
    }
    let offset = swf / sw;
    let function = axis.to_function(&fit.ordinates, fit.default).shifted(-offset);
    Ok(SmoothFit { function, offset })
}

pub(crate) fn w_floor(w: &[f64], v: &[f64]) -> f64 {
    let (mut s, mut sv) = (0.0, 0.0);
    for (&wi, &vi) in w.iter().zip(v) {
        s += vi * wi * wi;
        sv += vi;
    }
    if sv > 0.0 {
        W_FLOOR_REL * (s / sv).sqrt()
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Axes: the reusable, sort-once part of a smoother
// ---------------------------------------------------------------------------

/// Sort order, knot set and per-row interpolation coordinates for one numeric column.
#[derive(Debug, Clone)]
pub struct NumericAxis {
    /// Row indices sorted by value, ties by row index.
    order: Vec<u32>,
    knots: Vec<f64>,
    /// For each knot, number of rows with value < knot and ≤ knot (positions in `order`).
    knot_lo: Vec<u32>,
    knot_hi: Vec<u32>,
    /// Per row: left knot index and fractional position toward the next knot.
    seg: Vec<u32>,
    frac: Vec<f64>,
    /// Standardized values (for numerically stable local-linear sums).
    z: Vec<f64>,
    z_knots: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CategoricalAxis {
    codes: Vec<u32>,
    n_levels: usize,
}

#[derive(Debug, Clone)]
pub enum Axis {
    Numeric(NumericAxis),
    Categorical(CategoricalAxis),
}

/// Knot ordinates (or level values) from one smoother fit.
#[derive(Debug, Clone)]
pub struct AxisFit {
    pub ordinates: Vec<f64>,
    /// Value for unseen levels: the overall weighted mean of `r / w`.
    pub default: f64,
}

/// Reusable buffers so repeated fits do not allocate.
#[derive(Debug, Default)]
pub struct Scratch {
    p0: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
    q0: Vec<f64>,
    q1: Vec<f64>,
    incl: Vec<u32>,
    pub(crate) rows: Vec<f64>,
}

impl Axis {
    pub fn numeric(x: &[f64]) -> Result<Self> {
        NumericAxis::new(x).map(Axis::Numeric)
    }

    pub fn categorical(codes: &[f64], n_levels: usize) -> Self {
        Axis::Categorical(CategoricalAxis {
            codes: codes.iter().map(|&c| c as u32).collect(),
            n_levels,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::Numeric(a) => a.seg.len(),
            Axis::Categorical(a) => a.codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fits `E_{v w²}[r / w | x]` at the knots (or levels).
    ///
    /// `v` are row weights. Rows with `|w|` below the floor are excluded.
    pub fn fit(
        &self,
        r: &[f64],
        w: &[f64],
        v: &[f64],
        spec: &SmootherSpec,
        scratch: &mut Scratch,
    ) -> Result<AxisFit> {
        let floor = w_floor(w, v);
        match self {
            Axis::Categorical(a) => a.fit(r, w, v, floor, spec),
            Axis::Numeric(a) => a.fit(r, w, v, floor, spec, scratch),
        }
    }

    /// Evaluates a fit at every row of the axis.
    pub fn eval_rows(&self, ordinates: &[f64], out: &mut [f64]) {
        match self {
            Axis::Categorical(a) => {
                for (o, &c) in out.iter_mut().zip(&a.codes) {
                    *o = ordinates[c as usize];
                }
            }
            Axis::Numeric(a) => {
                for ((o, &s), &t) in out.iter_mut().zip(&a.seg).zip(&a.frac) {
                    let s = s as usize;
                    *o = if t == 0.0 {
                        ordinates[s]
                    } else {
                        ordinates[s] + t * (ordinates[s + 1] - ordinates[s])
                    };
                }
            }
        }
    }

    pub fn to_function(&self, ordinates: &[f64], default: f64) -> UnivariateFunction {
        match self {
            Axis::Categorical(_) => UnivariateFunction::LevelTable(LevelTable {
                values: ordinates.to_vec(),
                default,
            }),
            Axis::Numeric(a) => UnivariateFunction::Curve(Curve {
                knots: a.knots.clone(),
                values: ordinates.to_vec(),
            }),
        }
    }
}

impl CategoricalAxis {
    fn fit(&self, r: &[f64], w: &[f64], v: &[f64], floor: f64, spec: &SmootherSpec) -> Result<AxisFit> {
        let l = self.n_levels;
        let mut num = vec![0.0; l];
        let mut den = vec![0.0; l];
        let mut cnt = vec![0usize; l];
        let (mut tn, mut td) = (0.0, 0.0);
        for (i, &c) in self.codes.iter().enumerate() {
            let wi = w[i];
            if wi.abs() < floor {
                continue;
            }
            let c = c as usize;
            let a = v[i] * wi * r[i];
            let b = v[i] * wi * wi;
            num[c] += a;
            den[c] += b;
            cnt[c] += 1;
            tn += a;
            td += b;
        }
        if td <= 0.0 {
            return Err(Error::NoUsableRows);
        }
        let global = tn / td;
        let ordinates = (0..l)
            .map(|c| {
                if cnt[c] >= spec.min_count && den[c] > 0.0 {
                    num[c] / den[c]
                } else {
                    global
                }
            })
            .collect();
        Ok(AxisFit {
            ordinates,
            default: global,
        })
    }
}

impl NumericAxis {
    pub fn new(x: &[f64]) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty column".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidArgument("column too long".into()));
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| x[a as usize].total_cmp(&x[b as usize]).then(a.cmp(&b)));

        // Distinct values with their position ranges in `order`.
        let mut distinct: Vec<(f64, u32, u32)> = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            let xi = x[i as usize];
            match distinct.last_mut() {
                Some(d) if d.0 == xi => d.2 = pos as u32 + 1,
                _ => distinct.push((xi, pos as u32, pos as u32 + 1)),
            }
        }
        let d = distinct.len();
        let picked: Vec<usize> = if d <= MAX_KNOTS {
            (0..d).collect()
        } else {
            // Quantile thinning: knots at evenly spaced ranks, always keeping both ends.
            let mut idx: Vec<usize> = (0..MAX_KNOTS)
                .map(|k| {
                    let pos = (k as f64 * (n - 1) as f64 / (MAX_KNOTS - 1) as f64).round() as usize;
                    let row_rank = pos.min(n - 1) as u32;
                    distinct.partition_point(|t| t.2 <= row_rank)
                })
                .collect();
            idx.dedup();
            idx
        };
        let knots: Vec<f64> = picked.iter().map(|&k| distinct[k].0).collect();
        let knot_lo = picked.iter().map(|&k| distinct[k].1).collect();
        let knot_hi = picked.iter().map(|&k| distinct[k].2).collect();

        let mut seg = vec![0u32; n];
        let mut frac = vec![0.0; n];
        for i in 0..n {
            let xi = x[i];
            let hi = knots.partition_point(|&t| t <= xi);
            if hi == 0 {
                seg[i] = 0;
            } else if hi == knots.len() {
                seg[i] = (knots.len() - 1) as u32;
            } else {
                let lo = hi - 1;
                seg[i] = lo as u32;
                frac[i] = (xi - knots[lo]) / (knots[hi] - knots[lo]);
            }
        }

        let mean = x.iter().sum::<f64>() / n as f64;
        let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        let z = x.iter().map(|v| (v - mean) / scale).collect();
        let z_knots = knots.iter().map(|v| (v - mean) / scale).collect();
        Ok(NumericAxis {
            order,
            knots,
            knot_lo,
            knot_hi,
            seg,
            frac,
            z,
            z_knots,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn fit(
        &self,
        r: &[f64],
        w: &[f64],
        v: &[f64],
        floor: f64,
        spec: &SmootherSpec,
        s: &mut Scratch,
    ) -> Result<AxisFit> {
        let linear = spec.method == SmoothMethod::LocalLinear;
        let n = self.order.len();

        // Prefix sums over included rows in sorted order. `incl[pos]` counts
        // included rows strictly before sorted position `pos`.
        s.p0.clear();
        s.q0.clear();
        s.incl.clear();
        s.p0.push(0.0);
        s.q0.push(0.0);
        if linear {
            s.p1.clear();
            s.p2.clear();
            s.q1.clear();
            s.p1.push(0.0);
            s.p2.push(0.0);
            s.q1.push(0.0);
        }
        let (mut a0, mut a1, mut a2, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut m = 0u32;
        for &i in &self.order {
            s.incl.push(m);
            let i = i as usize;
            let wi = w[i];
            if wi.abs() < floor {
                continue;
            }
            m += 1;
            let om = v[i] * wi * wi;
            let ou = v[i] * wi * r[i];
            a0 += om;
            b0 += ou;
            s.p0.push(a0);
            s.q0.push(b0);
            if linear {
                let zi = self.z[i];
                a1 += om * zi;
                a2 += om * zi * zi;
                b1 += ou * zi;
                s.p1.push(a1);
                s.p2.push(a2);
                s.q1.push(b1);
            }
        }
        s.incl.push(m);
        let m = m as usize;
        if m == 0 || a0 <= 0.0 {
            return Err(Error::NoUsableRows);
        }
        let global = b0 / a0;
        debug_assert!(n + 1 == s.incl.len());

        let width = ((spec.span * m as f64).round() as usize)
            .max(spec.min_count)
            .max(2)
            .min(m);
        let half = (width - 1) as f64 / 2.0;

        let mut ordinates = Vec::with_capacity(self.knots.len());
        for k in 0..self.knots.len() {
            let a = s.incl[self.knot_lo[k] as usize] as f64;
            let b = s.incl[self.knot_hi[k] as usize] as f64;
            // Window centered on the knot's (mean) rank among included rows,
            // truncated at the ends of the data.
            let center = if b > a { (a + b - 1.0) / 2.0 } else { a - 0.5 };
            let lo = (center - half).ceil().max(0.0) as usize;
            let hi = ((center + half).floor() as isize).min(m as isize - 1).max(lo as isize) as usize;
            let lo = lo.min(hi);
            let sw = s.p0[hi + 1] - s.p0[lo];
            let su = s.q0[hi + 1] - s.q0[lo];
            if sw <= 0.0 {
                ordinates.push(global);
                continue;
            }
            let mean = su / sw;
            if !linear {
                ordinates.push(mean);
                continue;
            }
            let sz = s.p1[hi + 1] - s.p1[lo];
            let szz = s.p2[hi + 1] - s.p2[lo];
            let szu = s.q1[hi + 1] - s.q1[lo];
            let zbar = sz / sw;
            let var = szz / sw - zbar * zbar;
            if var <= 1e-10 * (1.0 + zbar * zbar) {
                ordinates.push(mean);
                continue;
            }
            let slope = (szu / sw - zbar * mean) / var;
            ordinates.push(mean + slope * (self.z_knots[k] - zbar));
        }
        Ok(AxisFit {
            ordinates,
            default: global,
        })
    }
}

// ---------------------------------------------------------------------------
// Regression spline
// ---------------------------------------------------------------------------

const SPLINE_DEGREE: usize = 3;
const SPLINE_SAMPLES: usize = 4096;

/// Interior knots at the 5th, 10th, …, 95th percentiles of `x`.
fn percentile_knots(sorted: &[f64]) -> Vec<f64> {
    let mut knots: Vec<f64> = (1..20)
        .map(|k| crate::stats::sorted_quantile(sorted, k as f64 * 0.05))
        .collect();
    knots.dedup();
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    knots.retain(|&k| k > lo && k < hi);
    knots
}

/// Cubic B-spline basis on the clamped knot vector built from `interior`.
struct BSpline {
    t: Vec<f64>,
}

impl BSpline {
    fn new(lo: f64, hi: f64, interior: &[f64]) -> Self {
        let mut t = vec![lo; SPLINE_DEGREE + 1];
        t.extend_from_slice(interior);
        t.extend(std::iter::repeat_n(hi, SPLINE_DEGREE + 1));
        BSpline { t }
    }

    fn n_basis(&self) -> usize {
        self.t.len() - SPLINE_DEGREE - 1
    }

    /// Nonzero basis values at `x` and the index of the first one.
    fn eval(&self, x: f64, out: &mut [f64; SPLINE_DEGREE + 1]) -> usize {
        let t = &self.t;
        let p = SPLINE_DEGREE;
        let nb = self.n_basis();
        let x = x.clamp(t[p], t[nb]);
        // Knot span index s with t[s] <= x < t[s+1], using the last span at the right end.
        let mut s = t.partition_point(|&k| k <= x).saturating_sub(1);
        s = s.clamp(p, nb - 1);
        let mut left = [0.0; SPLINE_DEGREE + 1];
        let mut right = [0.0; SPLINE_DEGREE + 1];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let den = right[r + 1] + left[j - r];
                let tmp = if den > 0.0 { out[r] / den } else { 0.0 };
                out[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            out[j] = saved;
        }
        s - p
    }
}

/// Least-squares cubic regression spline of `t` on `x` with interior knots
/// at the 5th through 95th percentiles of `x`.
///
/// The result is sampled onto a piecewise-linear [`Curve`]: at every distinct
/// `x` when there are at most 4096 of them (so the curve reproduces the spline
/// exactly at the data), otherwise at 4096 evenly spaced abscissas.
/// A rank-deficient design is solved by an eigenvalue pseudo-inverse of the
/// normal equations.
pub fn spline_fit(x: &[f64], t: &[f64]) -> Result<UnivariateFunction> {
    let n = x.len();
    if t.len() != n {
        return Err(Error::InvalidArgument("x and t must have equal lengths".into()));
    }
    if x.iter().chain(t).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("spline inputs must be finite".into()));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::Degenerate("spline abscissas are constant".into()));
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let spline = BSpline::new(lo, hi, &percentile_knots(&sorted));
    let nb = spline.n_basis();
    if n < nb {
        return Err(Error::InvalidArgument(format!(
            "spline needs at least {nb} points, got {n}"
        )));
    }
    let mut xtx = DMatrix::<f64>::zeros(nb, nb);
    let mut xty = DVector::<f64>::zeros(nb);
    let mut b = [0.0; SPLINE_DEGREE + 1];
    for (&xi, &ti) in x.iter().zip(t) {
        let first = spline.eval(xi, &mut b);
        for a in 0..=SPLINE_DEGREE {
            xty[first + a] += b[a] * ti;
            for c in 0..=SPLINE_DEGREE {
                xtx[(first + a, first + c)] += b[a] * b[c];
            }
        }
    }
    let eig = SymmetricEigen::new(xtx);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cut = top * 1e-12;
    let mut coef = DVector::<f64>::zeros(nb);
    let mut dropped = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= cut {
            dropped += 1;
            continue;
        }
        let u = eig.eigenvectors.column(k);
        coef += u * (u.dot(&xty) / lambda);
    }
    if dropped > 0 {
        log::warn!("spline design is rank deficient; {dropped} direction(s) dropped");
    }

    let knots: Vec<f64> = if sorted.len() <= SPLINE_SAMPLES {
        sorted
    } else {
        let step = (hi - lo) / (SPLINE_SAMPLES - 1) as f64;
        let mut k: Vec<f64> = (0..SPLINE_SAMPLES).map(|i| lo + step * i as f64).collect();
        k[SPLINE_SAMPLES - 1] = hi;
        k
    };
    let values = knots
        .iter()
        .map(|&xv| {
            let first = spline.eval(xv, &mut b);
            (0..=SPLINE_DEGREE).map(|a| b[a] * coef[first + a]).sum()
        })
        .collect();
    UnivariateFunction::curve(knots, values)
}
