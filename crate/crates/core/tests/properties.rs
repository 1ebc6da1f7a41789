mod common;

use function_trees::dataset::{rmse, Dataset};
use function_trees::interactions::{interaction_lattice, model_diff};
use function_trees::pdengine::{default_grid, pd_brute, pd_fast, EffectContext};
use function_trees::smoothers::{smooth, SmoothMethod, SmootherSpec, UnivariateFunction};
use function_trees::{FitConfig, Fitter, FunctionTree, SplitSpec};
use proptest::prelude::*;

fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: 32,
        ..ProptestConfig::default()
    }
}

fn xrw() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (10usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(0.1f64..2.0, n),
        )
    })
}

fn with_weights(d: &Dataset, seed: u64) -> Dataset {
    let w: Vec<f64> = (0..d.n_rows()).map(|i| 0.5 + ((i as u64 * 7 + seed) % 5) as f64 * 0.25).collect();
    Dataset::with_weights(
        d.variables.clone(),
        d.columns().to_vec(),
        d.target.clone(),
        d.outcome.clone(),
        w,
        None,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn near_neighbor_ignores_monotone_maps((x, r, w) in xrw(), a in 0.1f64..4.0, b in -3.0f64..3.0) {
        let spec = SmootherSpec::new(SmoothMethod::NearNeighbor);
        let f = smooth(&x, &r, &w, &spec).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| (a * v).exp() + b).collect();
        let g = smooth(&tx, &r, &w, &spec).unwrap();
        for (u, v) in x.iter().zip(&tx) {
            prop_assert!((f.function.eval(*u) - g.function.eval(*v)).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothed_functions_are_centered((x, r, w) in xrw(), ll in any::<bool>()) {
        let method = if ll { SmoothMethod::LocalLinear } else { SmoothMethod::NearNeighbor };
        let f = smooth(&x, &r, &w, &SmootherSpec::new(method)).unwrap();
        let (mut s, mut sw) = (0.0, 0.0);
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * wi * f.function.eval(*xi);
            sw += wi * wi;
        }
        prop_assert!((s / sw).abs() < 1e-9);
    }

    #[test]
    fn local_linear_reproduces_lines((x, _r, w) in xrw(), a in -3.0f64..3.0, b in -3.0f64..3.0, span in 0.05f64..1.0) {
        let r: Vec<f64> = x.iter().zip(&w).map(|(x, w)| (a * x + b) * w).collect();
        let spec = SmootherSpec { span, ..SmootherSpec::new(SmoothMethod::LocalLinear) };
        let f = smooth(&x, &r, &w, &spec).unwrap();
        for xi in &x {
            prop_assert!((f.function.eval(*xi) + f.offset - (a * xi + b)).abs() < 1e-8);
        }
    }

    #[test]
    fn lerp_hits_both_ends(k1 in prop::collection::vec(-2.0f64..2.0, 2..8), v in prop::collection::vec(-1.0f64..1.0, 8), t in 0.0f64..1.0) {
        let mut k = k1.clone();
        k.sort_by(f64::total_cmp);
        k.dedup();
        prop_assume!(k.len() >= 2);
        let f = UnivariateFunction::curve(k.clone(), v[..k.len()].to_vec()).unwrap();
        let g = UnivariateFunction::curve(vec![-1.0, 1.0], vec![v[0], -v[1]]).unwrap();
        let h = f.lerp(&g, t).unwrap();
        for x in [-2.5, -1.0, -0.3, 0.0, 0.7, 1.9] {
            let want = (1.0 - t) * f.eval(x) + t * g.eval(x);
            prop_assert!((h.eval(x) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_pd_matches_brute(seed in 0u64..1000, p in 2usize..6, k in 1usize..15) {
        let d = with_weights(&common::random_dataset(p, 60, seed), seed);
        let t = common::random_tree(&d, k, seed);
        for s in common::subsets(p, 2) {
            let pts = default_grid(&d, &s, 3);
            let a = pd_fast(&t, &s, &pts, &d).unwrap();
            let b = pd_brute(&|x: &[f64]| t.predict(x), &s, &pts, &d).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn pd_is_centered_over_the_data(seed in 0u64..1000, k in 1usize..15) {
        let d = with_weights(&common::random_dataset(4, 80, seed), seed);
        let t = common::random_tree(&d, k, seed);
        let ctx = EffectContext::new(&t, &d).unwrap();
        for s in common::subsets(4, 3) {
            let pts = common::data_points(&d, &s, d.n_rows());
            let g = ctx.pd(&s, &pts).unwrap();
            prop_assert!(common::weighted_mean(&g.values, &d.weight).abs() < 1e-8);
        }
    }

    #[test]
    fn inclusion_exclusion(seed in 0u64..1000, k in 1usize..15, size in 1usize..=4) {
        let d = common::random_dataset(5, 60, seed);
        let t = common::random_tree(&d, k, seed);
        let s: Vec<usize> = (0..size).map(|i| (i + seed as usize) % 5).collect();
        let mut s = s;
        s.sort_unstable();
        s.dedup();
        let pts = common::data_points(&d, &s, 10);
        let lat = interaction_lattice(&t, &s, &pts, &d).unwrap();
        let full = (1usize << s.len()) - 1;
        for i in 0..pts.len() {
            let sum: f64 = (1..=full).map(|u| lat.pure[u][i]).sum();
            prop_assert!((sum - lat.pd[full][i]).abs() < 1e-8);
        }
    }

    #[test]
    fn training_sse_never_increases(seed in 0u64..1000) {
        let mut d = common::random_dataset(3, 120, seed);
        let y: Vec<f64> = (0..120).map(|i| d.value(i, 1) * d.value(i, 2) + d.value(i, 0) + ((i * 13) % 7) as f64 * 0.05).collect();
        d = with_weights(&d.with_outcome("y", y).unwrap(), seed);
        let cfg = FitConfig { split: None, ..Default::default() };
        let mut f = Fitter::new(&d, &cfg).unwrap();
        let mut prev = f.train_sse();
        for _ in 0..8 {
            if f.add_best().unwrap().is_none() {
                break;
            }
            prop_assert!(f.train_sse() <= prev + 1e-9);
            prev = f.train_sse();
            f.backfit_pass().unwrap();
            prop_assert!(f.train_sse() <= prev + 1e-9);
            prev = f.train_sse();
        }
    }

    #[test]
    fn json_round_trip_is_exact(seed in 0u64..1000, k in 0usize..15) {
        let d = common::random_dataset(4, 40, seed);
        let t = common::random_tree(&d, k, seed);
        let back = FunctionTree::from_json(&t.to_json().unwrap()).unwrap();
        for i in 0..d.n_rows() {
            let x = d.row(i);
            prop_assert_eq!(t.predict(&x), back.predict(&x));
        }
    }

    #[test]
    fn pinned_tree_is_the_restriction(seed in 0u64..1000, k in 1usize..12, v in -1.0f64..1.0) {
        let d = common::random_dataset(4, 30, seed);
        let t = common::random_tree(&d, k, seed);
        let pinned = t.pinned(&[(2, v)]).unwrap();
        for i in 0..d.n_rows() {
            let mut x = d.row(i);
            let a = pinned.predict(&x);
            x[2] = v;
            prop_assert!((a - t.predict(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn diff_predicts_the_difference(seed in 0u64..1000, k in 0usize..10, j in 0usize..10) {
        let d = common::random_dataset(3, 30, seed);
        let a = common::random_tree(&d, k, seed);
        let b = common::random_tree(&d, j, seed + 1);
        let z = model_diff(&a, &b).unwrap();
        for i in 0..d.n_rows() {
            let x = d.row(i);
            prop_assert!((z.predict(&x) - (a.predict(&x) - b.predict(&x))).abs() < 1e-9);
        }
    }

    #[test]
    fn split_partitions_rows(n in 5usize..500, frac in 0.05f64..0.6, seed in any::<u64>()) {
        let s = SplitSpec { test_fraction: frac, seed };
        let (a, b) = s.partition(n).unwrap();
        prop_assert!(!a.is_empty() && !b.is_empty());
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(s.partition(n).unwrap(), (a, b));
    }

    #[test]
    fn predicting_the_mean_has_unit_rmse(y in prop::collection::vec(-10.0f64..10.0, 2..50)) {
        let m = y.iter().sum::<f64>() / y.len() as f64;
        prop_assume!(y.iter().any(|v| (v - m).abs() > 1e-6));
        prop_assert!((rmse(&y, &vec![m; y.len()]).unwrap() - 1.0).abs() < 1e-12);
    }
}
