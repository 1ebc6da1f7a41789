//! Acceptance gate: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use function_trees::dataset::{gen_friedman, gen_hu, rmse_target, Dataset, HuMode};
use function_trees::interactions::{
    bootstrap_compare, conditional_interaction, interaction_lattice, r_pool, screen_h, screen_r, search_effects,
    strength, SearchOptions,
};
use function_trees::pdengine::{default_grid, pd_brute, pd_fast, EffectContext};
use function_trees::smoothers::{smooth, SmoothMethod, SmootherSpec};
use function_trees::stats::rng_stream;
use function_trees::{fit, FitConfig, Fitter, FunctionTree};
use rand::seq::IndexedRandom;
use rand::Rng;

const SD_X: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Models {
    friedman: Dataset,
    friedman_tree: FunctionTree,
    friedman_time: Duration,
    hu: Dataset,
    hu_tree: FunctionTree,
    hu_time: Duration,
}

fn models() -> Models {
    let friedman = gen_friedman(10_000, 1, SD_X, 2.0).unwrap();
    let t0 = Instant::now();
    let friedman_tree = fit(&friedman, &FitConfig::default()).unwrap();
    let friedman_time = t0.elapsed();
    let hu = gen_hu(20_000, 1, HuMode::Regression).unwrap();
    let t0 = Instant::now();
    let hu_tree = fit(&hu, &FitConfig::default()).unwrap();
    let hu_time = t0.elapsed();
    Models {
        friedman,
        friedman_tree,
        friedman_time,
        hu,
        hu_tree,
        hu_time,
    }
}

fn c1(m: &Models) -> Outcome {
    let test = gen_friedman(10_000, 1001, SD_X, 2.0).unwrap();
    let pred = m.friedman_tree.predict_dataset(&test).unwrap();
    let e = rmse_target(test.truth.as_ref().unwrap(), &pred).unwrap();
    let explained = 1.0 - e * e;
    let secs = m.friedman_time.as_secs_f64();
    outcome(
        explained >= 0.95 && secs < 300.0,
        format!(
            "variance explained {explained:.4} (>= 0.95), fit {secs:.1}s, {} nodes",
            m.friedman_tree.n_nodes()
        ),
    )
}

fn c2(m: &Models) -> Outcome {
    let test = gen_hu(20_000, 1002, HuMode::Regression).unwrap();
    let pred = m.hu_tree.predict_dataset(&test).unwrap();
    let e = rmse_target(test.truth.as_ref().unwrap(), &pred).unwrap();
    outcome(
        e <= 0.10,
        format!(
            "target rmse {e:.4} (<= 0.10), fit {:.1}s, {} nodes",
            m.hu_time.as_secs_f64(),
            m.hu_tree.n_nodes()
        ),
    )
}

fn c3(m: &Models) -> Outcome {
    let opts = SearchOptions {
        max_order: 3,
        ..Default::default()
    };
    let r = search_effects(&m.friedman_tree, &m.friedman, &opts).unwrap();
    let pairs: Vec<Vec<usize>> = r.of_order(2).iter().take(3).map(|e| e.subset.clone()).collect();
    let triple = r.of_order(3).first().map(|e| e.subset.clone());
    let friedman_ok =
        pairs.contains(&vec![0, 1]) && pairs.contains(&vec![6, 7]) && triple.as_deref() == Some(&[3, 4, 5][..]);

    // Exhaustive search so effects of irrelevant variables are scored too.
    let all = SearchOptions {
        max_order: 3,
        use_screens: false,
        ..Default::default()
    };
    let h = search_effects(&m.hu_tree, &m.hu, &all).unwrap();
    let irrelevant = h
        .entries
        .iter()
        .filter(|e| e.subset.iter().any(|&j| j >= 20))
        .map(|e| e.strength)
        .fold(0.0, f64::max);
    let terms: [&[usize]; 8] = [&[0, 1], &[0, 2], &[1, 2], &[0, 1, 2], &[3, 4], &[3, 5], &[4, 5], &[3, 4, 5]];
    let weakest = terms
        .iter()
        .map(|s| h.find(s).map_or(0.0, |e| e.strength))
        .fold(f64::INFINITY, f64::min);
    outcome(
        friedman_ok && weakest >= 3.0 * irrelevant,
        format!(
            "top pairs {pairs:?}, top triple {triple:?}; weakest true term {weakest:.4} vs 3 x irrelevant {:.4}",
            3.0 * irrelevant
        ),
    )
}

fn c4() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for rep in 0..20u64 {
        let mut rng = rng_stream(rep, 40);
        let p = rng.random_range(2..=6);
        let k = rng.random_range(1..=15);
        let data = common::random_dataset(p, 200, rep);
        let tree = common::random_tree(&data, k, rep);
        for s in common::subsets(p, 3) {
            let points = default_grid(&data, &s, 4);
            let fast = pd_fast(&tree, &s, &points, &data).unwrap();
            let brute = pd_brute(&|x: &[f64]| tree.predict(x), &s, &points, &data).unwrap();
            for (a, b) in fast.values.iter().zip(&brute.values) {
                worst = worst.max((a - b).abs());
            }
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-8,
        format!("{checked} subsets on 20 trees, max |fast - brute| {worst:.2e} (<= 1e-8)"),
    )
}

fn c5(m: &Models) -> Outcome {
    let data = gen_friedman(3000, 5, SD_X, 2.0).unwrap();
    let mut worst_s = 0.0f64;
    for order in [1usize, 2] {
        let cfg = FitConfig {
            max_order: order,
            ..Default::default()
        };
        let tree = fit(&data, &cfg).unwrap();
        for s in common::subsets(8, order + 1).into_iter().filter(|s| s.len() > order) {
            worst_s = worst_s.max(strength(&tree, &s, &data).unwrap());
        }
    }

    let mut rng = rng_stream(5, 50);
    let mut worst_ie = 0.0f64;
    let vars: Vec<usize> = (0..30).collect();
    for i in 0..50 {
        let (tree, data, p) = if i % 2 == 0 {
            (&m.friedman_tree, &m.friedman, 8)
        } else {
            (&m.hu_tree, &m.hu, 30)
        };
        let size = rng.random_range(1..=4);
        let mut s: Vec<usize> = vars[..p].choose_multiple(&mut rng, size).copied().collect();
        s.sort_unstable();
        let points = common::data_points(data, &s, 25);
        let lat = interaction_lattice(tree, &s, &points, data).unwrap();
        let full = (1usize << s.len()) - 1;
        for (pt, want) in lat.pd[full].iter().enumerate() {
            let sum: f64 = (1..=full).filter(|u| u & full == *u).map(|u| lat.pure[u][pt]).sum();
            worst_ie = worst_ie.max((sum - want).abs());
        }
    }
    outcome(
        worst_s < 1e-6 && worst_ie <= 1e-8,
        format!("max S above fitted order {worst_s:.2e} (< 1e-6), inclusion-exclusion error {worst_ie:.2e} (<= 1e-8)"),
    )
}

fn c6(m: &Models) -> Outcome {
    let points = default_grid(&m.friedman, &[3, 4], 15);
    let at = |v: f64| {
        conditional_interaction(&m.friedman_tree, &[3, 4], &[(5, v)], &points, &m.friedman)
            .unwrap()
            .values
    };
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let (zero, plus, minus) = (at(0.0), at(2.0), at(-2.0));
    let ratio = rms(&zero) / rms(&plus);
    let dot: f64 = plus.iter().zip(&minus).map(|(a, b)| a * b).sum();
    let cos = dot / (rms(&plus) * rms(&minus) * plus.len() as f64);
    outcome(
        ratio < 0.2 && cos < 0.0,
        format!("rms ratio x6=0 vs x6=2 {ratio:.3} (< 0.2), cosine x6=+2 vs -2 {cos:.3} (< 0)"),
    )
}

fn c7(m: &Models) -> Outcome {
    let ctx_data = m.hu.subsample(1000, 0);
    let h = screen_h(&m.hu_tree, &ctx_data, 0.05).unwrap();
    let r = screen_r(&m.hu_tree, 4);
    let level4 = r_pool(&r, 4, 0.05);
    outcome(
        h.flagged == vec![0, 1, 2, 3, 4, 5] && level4.is_empty(),
        format!("H flagged {:?}, R pool at level 4 {level4:?}", h.flagged),
    )
}

fn c8() -> Outcome {
    let data = gen_friedman(10_000, 8, SD_X, 2.0).unwrap();
    let configs: Vec<FitConfig> = [0usize, 2, 1]
        .iter()
        .map(|&o| FitConfig {
            max_order: o,
            ..Default::default()
        })
        .collect();
    let res = bootstrap_compare(&data, &configs, 20, 8).unwrap();
    let med: Vec<f64> = res.iter().map(|r| r.median()).collect();
    outcome(
        med[0] < med[1] && med[1] < med[2],
        format!(
            "median rmse unconstrained {:.4} < order 2 {:.4} < order 1 {:.4}",
            med[0], med[1], med[2]
        ),
    )
}

fn c9() -> Outcome {
    let mut failures = Vec::new();

    // Rank-only smoother: ordinates unchanged under a monotone map of x.
    let mut rng = rng_stream(9, 90);
    let x: Vec<f64> = (0..400).map(|_| rng.random_range(-2.0..2.0)).collect();
    let r: Vec<f64> = x.iter().map(|v| v.sin() + rng.random_range(-0.3..0.3)).collect();
    let w: Vec<f64> = (0..400).map(|_| rng.random_range(0.5..1.5)).collect();
    let spec = SmootherSpec::new(SmoothMethod::NearNeighbor);
    let a = smooth(&x, &r, &w, &spec).unwrap();
    let tx: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + v.powi(3)).collect();
    let b = smooth(&tx, &r, &w, &spec).unwrap();
    let eq = (0..400).all(|i| (a.function.eval(x[i]) - b.function.eval(tx[i])).abs() < 1e-12);
    if !eq {
        failures.push("equivariance");
    }

    // Training SSE along additions and backfit passes.
    let data = gen_friedman(3000, 9, SD_X, 2.0).unwrap();
    let cfg = FitConfig::default();
    let mut f = Fitter::new(&data, &cfg).unwrap();
    let mut prev = f.train_sse();
    let mut mono = true;
    for _ in 0..25 {
        if f.add_best().unwrap().is_none() {
            break;
        }
        mono &= f.train_sse() <= prev + 1e-9;
        prev = f.train_sse();
        for _ in 0..cfg.backfit_passes {
            f.backfit_pass().unwrap();
            mono &= f.train_sse() <= prev + 1e-9;
            prev = f.train_sse();
        }
    }
    if !mono {
        failures.push("sse monotonicity");
    }

    // Centering over the data distribution of the subset.
    let tree = fit(&data, &cfg).unwrap();
    let ctx = EffectContext::new(&tree, &data).unwrap();
    let mut worst = 0.0f64;
    for s in [vec![0], vec![3, 4], vec![3, 4, 5], vec![6, 7]] {
        let pts = common::data_points(&data, &s, data.n_rows());
        let g = ctx.pd(&s, &pts).unwrap();
        worst = worst.max(common::weighted_mean(&g.values, &data.weight).abs());
    }
    if worst > 1e-8 {
        failures.push("centering");
    }

    // Save and load.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    tree.save(&path).unwrap();
    let back = FunctionTree::load(&path).unwrap();
    let same = (0..data.n_rows()).all(|i| {
        let row = data.row(i);
        (tree.predict(&row) - back.predict(&row)).abs() <= 1e-12
    });
    if !same {
        failures.push("save/load");
    }

    // Determinism.
    let again = fit(&gen_friedman(3000, 9, SD_X, 2.0).unwrap(), &cfg).unwrap();
    let opts = SearchOptions::default();
    let det = again.to_json().unwrap() == tree.to_json().unwrap()
        && search_effects(&tree, &data, &opts).unwrap() == search_effects(&again, &data, &opts).unwrap();
    if !det {
        failures.push("determinism");
    }

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("all five properties hold (centering error {worst:.1e})")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn report(n: usize, started: Instant, o: Outcome) -> bool {
    println!(
        "criterion {n}: {} {} [{:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    o.pass
}

fn main() {
    let t = Instant::now();
    let m = models();
    println!("fitted benchmark models in {:.1}s", t.elapsed().as_secs_f64());
    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, t, c1(&m));
    let t = Instant::now();
    ok &= report(2, t, c2(&m));
    let t = Instant::now();
    ok &= report(3, t, c3(&m));
    let t = Instant::now();
    ok &= report(4, t, c4());
    let t = Instant::now();
    ok &= report(5, t, c5(&m));
    let t = Instant::now();
    ok &= report(6, t, c6(&m));
    let t = Instant::now();
    ok &= report(7, t, c7(&m));
    let t = Instant::now();
    ok &= report(8, t, c8());
    let t = Instant::now();
    ok &= report(9, t, c9());
    if !ok {
        std::process::exit(1);
    }
}
