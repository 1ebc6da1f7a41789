mod common;

use std::sync::OnceLock;

use function_trees::dataset::{gen_friedman, gen_hu, Dataset, HuMode, Variable};
use function_trees::interactions::{
    bootstrap_compare, conditional_interaction, conditional_interaction_brute, model_diff, pure_interaction,
    pure_interaction_brute, screen_h, screen_r, search_effects, strength, SearchOptions,
};
use function_trees::pdengine::{decompose, default_grid, eval_cost, pa, pd_brute, pd_fast, product_grid};
use function_trees::{fit, FitConfig, FunctionTree, UnivariateFunction};

fn friedman() -> &'static (Dataset, FunctionTree) {
    static M: OnceLock<(Dataset, FunctionTree)> = OnceLock::new();
    M.get_or_init(|| {
        let d = gen_friedman(10_000, 1, 0.5, 2.0).unwrap();
        let t = fit(&d, &FitConfig::default()).unwrap();
        (d, t)
    })
}

fn line(a: f64) -> UnivariateFunction {
    UnivariateFunction::curve(vec![-10.0, 10.0], vec![-10.0 * a, 10.0 * a]).unwrap()
}

fn uniform(p: usize, n: usize, seed: u64) -> Dataset {
    let mut d = common::random_dataset(p + 1, n, seed);
    // Drop the categorical column so every variable is uniform on [-1, 1].
    d = d.without_columns(&["c1".to_string()]).unwrap();
    d
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn decomposition_extremes() {
    let d = common::random_dataset(4, 100, 1);
    let t = common::random_tree(&d, 10, 1);
    let all = decompose(&t, &[0, 1, 2, 3], &d).unwrap();
    assert_eq!(all.alpha, 0.0);
    assert!(all.terms().iter().all(|&k| all.gbar(k) == 1.0));

    let mut t2 = FunctionTree::new(d.variables.clone(), 2.0);
    t2.add_node(0, 1, line(1.0)).unwrap();
    let g = pd_fast(&t2, &[3], &default_grid(&d, &[3], 5), &d).unwrap();
    assert!(g.values.iter().all(|&v| v == 0.0));
}

#[test]
fn alpha_counts_mixed_paths() {
    let d = common::random_dataset(5, 100, 2);
    for seed in 0..5 {
        let t = common::random_tree(&d, 12, seed);
        for z in [vec![1], vec![1, 2], vec![0, 3, 4]] {
            let mixed = t
                .nodes()
                .iter()
                .filter(|n| {
                    let v = t.path_vars(n.id);
                    v.iter().any(|j| z.contains(j)) && v.iter().any(|j| !z.contains(j))
                })
                .count();
            let dec = decompose(&t, &z, &d).unwrap();
            assert_eq!(dec.alpha, mixed as f64 / t.n_nodes() as f64);
            assert_eq!(dec.mixed_terms().len(), mixed);
        }
    }
}

#[test]
fn fast_pd_equals_brute_force() {
    for seed in 0..6 {
        let d = common::random_dataset(4, 150, seed);
        let t = common::random_tree(&d, 9, seed + 100);
        for s in common::subsets(4, 3) {
            let pts = default_grid(&d, &s, 5);
            let a = pd_fast(&t, &s, &pts, &d).unwrap();
            let b = pd_brute(&|x: &[f64]| t.predict(x), &s, &pts, &d).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn root_only_and_constant_predictors_have_zero_pd() {
    let d = uniform(3, 50, 3);
    let t = FunctionTree::new(d.variables.clone(), 4.0);
    let pts = default_grid(&d, &[0], 7);
    assert!(pd_fast(&t, &[0], &pts, &d).unwrap().values.iter().all(|&v| v == 0.0));
    let b = pd_brute(&|_: &[f64]| 4.0, &[0], &pts, &d).unwrap();
    assert!(b.values.iter().all(|&v| v == 0.0));
}

#[test]
fn brute_pd_of_linear_model_and_its_cost() {
    let d = uniform(2, 80, 4);
    let a = 2.5;
    let pts: Vec<Vec<f64>> = vec![vec![-0.7], vec![0.1], vec![0.9]];
    let g = pd_brute(&|x: &[f64]| a * x[0] - x[1], &[0], &pts, &d).unwrap();
    let m = d.column(0).iter().sum::<f64>() / 80.0;
    for (p, v) in pts.iter().zip(&g.values) {
        assert!((v - (a * p[0] - a * m)).abs() < 1e-12);
    }
    assert_eq!(g.evaluations, (80 * 3) as f64);
}

#[test]
fn friedman_main_effect_of_x3_is_quadratic() {
    let (d, t) = friedman();
    // Interior quantiles: beyond the data the fitted curves are held constant.
    let mut x: Vec<f64> = d.column(2).to_vec();
    x.sort_by(f64::total_cmp);
    let pts: Vec<Vec<f64>> = (1..40).map(|i| vec![x[i * x.len() / 40]]).collect();
    let g = pd_fast(t, &[2], &pts, d).unwrap();
    let e: f64 = d.column(2).iter().map(|x| 7.0 * x * x).sum::<f64>() / d.n_rows() as f64;
    let err: Vec<f64> = pts.iter().zip(&g.values).map(|(p, v)| v - (7.0 * p[0] * p[0] - e)).collect();
    assert!(rms(&err) < 0.15, "{}", rms(&err));
}

#[test]
fn pa_equals_pd_without_mixed_bases() {
    let d = uniform(3, 200, 5);
    let mut t = FunctionTree::new(d.variables.clone(), 0.0);
    let a = t.add_node(0, 0, line(1.0)).unwrap();
    t.add_node(a, 0, line(0.5)).unwrap();
    t.add_node(0, 1, line(-1.0)).unwrap();
    let pts = default_grid(&d, &[0], 9);
    let x = pa(&t, &[0], &pts, &d).unwrap();
    let y = pd_fast(&t, &[0], &pts, &d).unwrap();
    assert_eq!(x.values, y.values);
}

#[test]
fn pa_tracks_pd_under_independence() {
    let d = gen_friedman(20_000, 21, 0.5, 2.0).unwrap();
    let t = fit(&d, &FitConfig::default()).unwrap();
    for s in [vec![0], vec![2], vec![6], vec![3, 4]] {
        let pts = common::data_points(&d, &s, 2000);
        let x = pa(&t, &s, &pts, &d).unwrap();
        let y = pd_fast(&t, &s, &pts, &d).unwrap();
        let diff: Vec<f64> = x.values.iter().zip(&y.values).map(|(a, b)| a - b).collect();
        // Each mixed basis contributes estimation noise of about its
        // influence times sqrt(spline dof / N).
        let dec = decompose(&t, &s, &d).unwrap();
        let noise: f64 = dec.mixed_terms().iter().map(|&k| t.node(k).unwrap().influence).sum::<f64>()
            * (23.0 / d.n_rows() as f64).sqrt();
        assert!(rms(&diff) <= (1.5 * noise).max(0.05), "{s:?} {} {noise}", rms(&diff));
    }
}

#[test]
fn eval_cost_formula() {
    let d = uniform(2, 100, 6);
    let mut t = FunctionTree::new(d.variables.clone(), 0.0);
    let a = t.add_node(0, 0, line(1.0)).unwrap();
    t.add_node(a, 1, line(1.0)).unwrap();
    let none = decompose(&t, &[0, 1], &d).unwrap();
    assert_eq!(eval_cost(&none, 1000, 40), 40.0);
    let half = decompose(&t, &[0], &d).unwrap();
    assert_eq!(half.alpha, 0.5);
    assert_eq!(eval_cost(&half, 1000, 1000), 1500.0);
}

#[test]
fn hu_search_is_cheap_compared_with_brute_force() {
    let d = gen_hu(20_000, 1, HuMode::Regression).unwrap();
    let t = fit(&d, &FitConfig::default()).unwrap();
    let r = search_effects(&t, &d, &SearchOptions { max_order: 4, ..Default::default() }).unwrap();
    assert!(r.evaluations <= 1e6, "{}", r.evaluations);
    // Brute force would average over all rows for every point of every PD.
    let brute = (r.n_pd * 1000 * 1000) as f64;
    assert!(brute >= 1e7 && brute / r.evaluations > 100.0);
    let four: Vec<_> = r.of_order(4);
    assert!(four.iter().all(|e| e.strength < 0.01));
    for s in [[0usize, 1].as_slice(), &[0, 2], &[1, 2], &[0, 1, 2], &[3, 4], &[3, 5], &[4, 5], &[3, 4, 5]] {
        assert!(r.find(s).unwrap().strength > 0.03, "{s:?}");
    }
}

#[test]
fn additive_tree_has_no_pure_interactions() {
    let d = uniform(3, 200, 7);
    let mut t = FunctionTree::new(d.variables.clone(), 1.0);
    t.add_node(0, 0, line(1.0)).unwrap();
    let b = t.add_node(0, 1, line(2.0)).unwrap();
    t.add_node(b, 1, line(-0.5)).unwrap();
    let g = pure_interaction(&t, &[0, 1], &default_grid(&d, &[0, 1], 8), &d).unwrap();
    assert!(g.values.iter().all(|v| v.abs() < 1e-8));
    for s in [vec![0, 1], vec![0, 2], vec![0, 1, 2]] {
        assert!(strength(&t, &s, &d).unwrap() < 1e-6);
    }
    let h = screen_h(&t, &d, 0.05).unwrap();
    assert!(h.scores.iter().all(|&v| v < 1e-6));
    assert!(h.flagged.is_empty());
    let r = screen_r(&t, 4);
    assert!(r.iter().all(|row| row[1..].iter().all(|&v| v == 0.0)));
}

#[test]
fn bilinear_tree_has_exact_pure_interaction() {
    let d = uniform(2, 40_000, 8);
    let mut t = FunctionTree::new(d.variables.clone(), 0.0);
    let a = t.add_node(0, 0, line(1.0)).unwrap();
    t.add_node(a, 1, line(1.0)).unwrap();
    // Cancel the x1 main basis so the model is exactly x1 * x2.
    t.add_node(0, 0, line(-1.0)).unwrap();
    let axis = vec![-0.8, -0.3, 0.0, 0.4, 0.9];
    let pts = product_grid(&[axis.clone(), axis.clone()]);
    let g = pure_interaction(&t, &[0, 1], &pts, &d).unwrap();
    for (p, v) in pts.iter().zip(&g.values) {
        assert!((v - p[0] * p[1]).abs() < 0.01, "{p:?} {v}");
    }
    for j in 0..2 {
        let pts1: Vec<Vec<f64>> = axis.iter().map(|&x| vec![x]).collect();
        let m = pure_interaction(&t, &[j], &pts1, &d).unwrap();
        assert!(rms(&m.values) < 0.02);
    }
    let b = pure_interaction_brute(&|x: &[f64]| x[0] * x[1], &[0, 1], &pts, &d).unwrap();
    for (x, y) in g.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn friedman_pair_x7_x8_range() {
    let (d, t) = friedman();
    let g = pure_interaction(t, &[6, 7], &default_grid(d, &[6, 7], 40), d).unwrap();
    let (lo, hi) = (g.min(), g.max());
    assert!((-5.06 * 1.15..=-5.06 * 0.85).contains(&lo), "{lo}");
    assert!((5.49 * 0.85..=5.49 * 1.15).contains(&hi), "{hi}");
}

#[test]
fn strength_properties_on_friedman() {
    let (d, t) = friedman();
    let a = strength(t, &[3, 4, 5], d).unwrap();
    let b = strength(t, &[5, 3, 4], d).unwrap();
    assert_eq!(a, b);
    assert!(a > strength(t, &[3, 4], d).unwrap());
}

#[test]
fn conditioning_on_an_unused_variable_changes_nothing() {
    let d = common::random_dataset(4, 150, 9);
    let mut t = FunctionTree::new(d.variables.clone(), 0.0);
    let a = t.add_node(0, 1, line(1.0)).unwrap();
    let b = t.add_node(a, 2, line(2.0)).unwrap();
    t.add_node(b, 1, line(-1.0)).unwrap();
    let pts = default_grid(&d, &[1, 2], 6);
    let u = pure_interaction(&t, &[1, 2], &pts, &d).unwrap();
    let c = conditional_interaction(&t, &[1, 2], &[(3, 0.25)], &pts, &d).unwrap();
    assert_eq!(u.values, c.values);
}

#[test]
fn conditional_fast_equals_brute() {
    let d = common::random_dataset(4, 120, 10);
    for seed in 0..4 {
        let t = common::random_tree(&d, 10, seed);
        let pts = default_grid(&d, &[1, 2], 4);
        for v in [-0.5, 0.7] {
            let a = conditional_interaction(&t, &[1, 2], &[(3, v)], &pts, &d).unwrap();
            let b = conditional_interaction_brute(&t, &[1, 2], &[(3, v)], &pts, &d).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }
    let t = common::random_tree(&d, 4, 0);
    assert!(conditional_interaction(&t, &[1, 2], &[(2, 0.0)], &[vec![0.0, 0.0]], &d).is_err());
}

#[test]
fn friedman_screens_and_search() {
    let (d, t) = friedman();
    let h = screen_h(t, d, 0.05).unwrap();
    let x3 = h.scores[2];
    assert!(h.scores.iter().enumerate().all(|(j, &s)| j == 2 || s > x3));

    let r = search_effects(t, d, &SearchOptions::default()).unwrap();
    assert_eq!(r.of_order(1)[0].subset, vec![2]);
    let pairs: Vec<_> = r.of_order(2).iter().take(3).map(|e| e.subset.clone()).collect();
    assert!(pairs.contains(&vec![0, 1]) && pairs.contains(&vec![6, 7]));
    assert_eq!(r.of_order(3)[0].subset, vec![3, 4, 5]);

    let all = search_effects(t, d, &SearchOptions { use_screens: false, ..Default::default() }).unwrap();
    let top = |r: &function_trees::EffectReport| r.ranked().iter().take(5).map(|e| e.subset.clone()).collect::<Vec<_>>();
    assert_eq!(top(&r), top(&all));
}

#[test]
fn single_path_r_screen() {
    let d = uniform(3, 100, 11);
    let mut t = FunctionTree::new(d.variables.clone(), 0.0);
    let a = t.add_node(0, 0, line(0.0).clone()).unwrap();
    t.add_node(a, 1, line(1.0)).unwrap();
    t.set_influences(&d).unwrap();
    let r = screen_r(&t, 3);
    let inf = t.node(2).unwrap().influence;
    assert_eq!((r[0][1], r[1][1]), (inf, inf));
}

#[test]
fn diff_models() {
    let (d, t) = friedman();
    let z = model_diff(t, t).unwrap();
    assert!((0..200).all(|i| z.predict(&d.row(i)).abs() < 1e-12));

    let mut b = t.clone();
    let extra = b.add_node(3, 6, line(0.3)).unwrap();
    let diff = model_diff(&b, t).unwrap();
    let basis = &b.basis_values(d).unwrap()[extra - 1];
    for i in 0..200 {
        assert!((diff.predict(&d.row(i)) - basis[i]).abs() < 1e-9);
    }
}

#[test]
fn diff_exposes_forbidden_structure() {
    let (d, t) = friedman();
    let c = fit(
        d,
        &FitConfig {
            forbidden: vec![vec![3, 4, 5]],
            ..Default::default()
        },
    )
    .unwrap();
    let diff = model_diff(t, &c).unwrap();
    let pts = default_grid(d, &[3, 4], 10);
    let g = conditional_interaction(&diff, &[3, 4], &[(5, 1.5)], &pts, d).unwrap();
    assert!(rms(&g.values) > 0.1, "{}", rms(&g.values));
}

#[test]
fn bootstrap_is_reproducible() {
    let d = gen_friedman(600, 30, 0.5, 2.0).unwrap();
    let cfg = FitConfig {
        max_nodes: 6,
        ..Default::default()
    };
    let r = bootstrap_compare(&d, &[cfg.clone(), cfg], 3, 4).unwrap();
    assert_eq!(r[0], r[1]);
    assert!(r[0].rmse.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(bootstrap_compare(&d, &[FitConfig::default()], 1, 4).is_err());
}

#[test]
fn categorical_variables_in_effects() {
    let d = common::random_dataset(3, 300, 12);
    let t = common::random_tree(&d, 8, 12);
    let pts = default_grid(&d, &[0, 1], 5);
    assert_eq!(pts.len(), 3 * 5);
    let a = pure_interaction(&t, &[0, 1], &pts, &d).unwrap();
    let b = pure_interaction_brute(&|x: &[f64]| t.predict(x), &[0, 1], &pts, &d).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-8);
    }
    let _ = Variable::numeric("unused", (0.0, 1.0));
}
