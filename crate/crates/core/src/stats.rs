//! Small weighted-moment helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let mut sw = 0.0;
    let mut swx = 0.0;
    for (&v, &w) in values.iter().zip(weights) {
        sw += w;
        swx += w * v;
    }
    if sw > 0.0 {
        swx / sw
    } else {
        0.0
    }
}

/// Weighted population variance (divisor = total weight).
pub(crate) fn weighted_var(values: &[f64], weights: &[f64]) -> f64 {
    let m = weighted_mean(values, weights);
    let mut sw = 0.0;
    let mut ss = 0.0;
    for (&v, &w) in values.iter().zip(weights) {
        sw += w;
        ss += w * (v - m) * (v - m);
    }
    if sw > 0.0 {
        ss / sw
    } else {
        0.0
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linearly interpolated quantile of already sorted data.
pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Independent random stream `stream` derived from a single user seed.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
