#![allow(dead_code)]

use function_trees::dataset::{Dataset, Variable};
use function_trees::stats::rng_stream;
use function_trees::{FunctionTree, UnivariateFunction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Mixed-type dataset: variable 0 is categorical with three levels when
/// `p > 1`, the rest are uniform on [-1, 1].
pub fn random_dataset(p: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = rng_stream(seed, 11);
    let mut vars = Vec::with_capacity(p);
    let mut cols = Vec::with_capacity(p);
    for j in 0..p {
        if j == 0 && p > 1 {
            vars.push(Variable::categorical("c1", vec!["a".into(), "b".into(), "c".into()]));
            cols.push((0..n).map(|_| rng.random_range(0..3) as f64).collect());
        } else {
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            vars.push(Variable::numeric(format!("x{}", j + 1), (-1.0, 1.0)));
            cols.push(c);
        }
    }
    let y = vec![0.0; n];
    Dataset::new(vars, cols, "y", y).unwrap()
}

pub fn random_function(var: &Variable, rng: &mut ChaCha8Rng) -> UnivariateFunction {
    if var.is_categorical() {
        let values = (0..var.levels.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
        UnivariateFunction::level_table(values, 0.0).unwrap()
    } else {
        let m = rng.random_range(2..7);
        let mut knots: Vec<f64> = (0..m).map(|_| rng.random_range(-1.2..1.2)).collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let values = knots.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        UnivariateFunction::curve(knots, values).unwrap()
    }
}

/// Tree with `k` nodes attached to uniformly chosen existing nodes.
pub fn random_tree(data: &Dataset, k: usize, seed: u64) -> FunctionTree {
    let mut rng = rng_stream(seed, 12);
    let mut t = FunctionTree::new(data.variables.clone(), rng.random_range(-1.0..1.0));
    for _ in 0..k {
        let parent = rng.random_range(0..=t.n_nodes());
        let var = rng.random_range(0..data.n_vars());
        let f = random_function(&data.variables[var], &mut rng);
        t.add_node(parent, var, f).unwrap();
    }
    t
}

/// Every nonempty subset of `0..p` with at most `max` elements.
pub fn subsets(p: usize, max: usize) -> Vec<Vec<usize>> {
    (1usize..1 << p)
        .filter(|m| m.count_ones() as usize <= max)
        .map(|m| (0..p).filter(|j| m >> j & 1 == 1).collect())
        .collect()
}

/// Points of `subset` taken from the first `n` data rows.
pub fn data_points(data: &Dataset, subset: &[usize], n: usize) -> Vec<Vec<f64>> {
    (0..n.min(data.n_rows()))
        .map(|i| subset.iter().map(|&j| data.value(i, j)).collect())
        .collect()
}

pub fn weighted_mean(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>()
}
