//! `ftree`: fit function trees and analyze them from the command line.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use function_trees::dataset::{self, Dataset, LoadOptions};
use function_trees::interactions::{self, SearchOptions};
use function_trees::pdengine::{self, default_grid, EffectGrid};
use function_trees::{Error, FitConfig, FunctionTree, SmoothMethod, SmootherSpec, SplitSpec};

#[derive(Parser)]
#[command(name = "ftree", version, about = "Function tree models and interaction analysis")]
struct Cli {
    /// Seed for every random choice (splits, resampling, subsampling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// More progress output on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic benchmark dataset.
    Gen(GenArgs),
    /// Fit a function tree.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Rank main and interaction effects.
    Effects(EffectsArgs),
    /// Partial dependence (or partial association) grid.
    Pd(PdArgs),
    /// Pure interaction grid, optionally conditioned on fixed values.
    Interact(InteractArgs),
    /// Difference of two models as a model.
    Diff(DiffArgs),
    /// Bootstrap comparison of constrained refits.
    Bootstrap(BootstrapArgs),
    /// Fit a tree to another model's predictions.
    Surrogate(SurrogateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Friedman,
    HuRegression,
    HuClassification,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    example: Example,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    /// Predictor standard deviation for the eight-variable benchmark.
    #[arg(long, default_value_t = 0.5)]
    sd_x: f64,
    /// Signal-to-noise ratio (sd of target over sd of noise); `inf` for none.
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Smoother {
    LocalLinear,
    NearNeighbor,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    /// Columns forced to be categorical (comma separated).
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Numeric columns with at most this many distinct values become categorical.
    #[arg(long, default_value_t = 10)]
    categorical_threshold: usize,
    /// Row-weight column.
    #[arg(long)]
    weight: Option<String>,
    /// Columns to ignore (comma separated).
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Error> {
        let opts = LoadOptions {
            target: self.target.clone(),
            categorical_override: self.categorical.clone(),
            categorical_threshold: self.categorical_threshold,
            weight: self.weight.clone(),
            exclude: self.exclude.clone(),
        };
        dataset::load_csv(&self.data, &opts)
    }
}

#[derive(Args, Clone)]
struct FitFlags {
    #[arg(long, default_value_t = 200)]
    max_nodes: usize,
    /// Largest interaction order (0 = unlimited).
    #[arg(long, default_value_t = 0)]
    max_order: usize,
    /// Comma-separated variable set that may not appear together on a path (repeatable).
    #[arg(long)]
    forbid: Vec<String>,
    #[arg(long, value_enum, default_value_t = Smoother::LocalLinear)]
    smoother: Smoother,
    /// Neighborhood span (default 0.2 for local linear, 0.1 for near neighbor).
    #[arg(long)]
    span: Option<f64>,
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Grow to --max-nodes without a held-out stopping sample.
    #[arg(long)]
    no_split: bool,
    #[arg(long, default_value_t = 2)]
    backfit_passes: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
}

impl FitFlags {
    fn config(&self, data: &Dataset, seed: u64) -> Result<FitConfig, Error> {
        let method = match self.smoother {
            Smoother::LocalLinear => SmoothMethod::LocalLinear,
            Smoother::NearNeighbor => SmoothMethod::NearNeighbor,
        };
        let numeric = SmootherSpec {
            span: self.span.unwrap_or(method.default_span()),
            min_count: self.min_count,
            method,
        };
        Ok(FitConfig {
            max_nodes: self.max_nodes,
            max_order: self.max_order,
            forbidden: forbid_sets(&self.forbid, data)?,
            numeric_smoother: numeric,
            categorical_smoother: SmootherSpec {
                min_count: self.min_count,
                ..SmootherSpec::new(SmoothMethod::CategoricalMean)
            },
            split: (!self.no_split).then_some(SplitSpec {
                test_fraction: self.test_fraction,
                seed,
            }),
            backfit_passes: self.backfit_passes,
            patience: self.patience,
            ..FitConfig::default()
        })
    }
}

fn forbid_sets(groups: &[String], data: &Dataset) -> Result<Vec<Vec<usize>>, Error> {
    groups.iter().map(|g| var_indices(data, g)).collect()
}

fn var_index(data: &Dataset, name: &str) -> Result<usize, Error> {
    data.var_index(name.trim())
        .ok_or_else(|| Error::InvalidArgument(format!("unknown variable {:?}", name.trim())))
}

fn var_indices(data: &Dataset, list: &str) -> Result<Vec<usize>, Error> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(|n| var_index(data, n)).collect()
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Name of the appended prediction column.
    #[arg(long, default_value = "prediction")]
    column: String,
}

#[derive(Args)]
struct EffectsArgs {
    #[arg(long)]
    model: PathBuf,
    /// Data defining the averaging distribution.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    max_order: usize,
    /// Score every subset instead of screening variables first.
    #[arg(long)]
    no_screen: bool,
    /// Add strengths computed from partial association (orders 1 and 2).
    #[arg(long)]
    pa: bool,
    /// Rows sampled for averaging (0 = all rows).
    #[arg(long, default_value_t = 1000)]
    context_rows: usize,
    #[arg(long, default_value_t = 0.05)]
    h_threshold: f64,
    #[arg(long, default_value_t = 0.05)]
    r_threshold: f64,
    /// Also write the screening log here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct PdArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated variable names.
    #[arg(long)]
    vars: String,
    /// Points per numeric axis.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    /// Partial association instead of partial dependence (1 or 2 variables).
    #[arg(long)]
    pa: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InteractArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    vars: String,
    /// Conditioning assignment `name=value` (repeatable).
    #[arg(long)]
    given: Vec<String>,
    #[arg(long, default_value_t = 20)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitFlags,
    /// One refit per listed interaction-order limit (0 = unlimited).
    #[arg(long, value_delimiter = ',', default_value = "0,2,1")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Per-replicate RMSE table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SurrogateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Column holding the external model's predictions.
    #[arg(long)]
    pred: String,
    /// Columns to ignore, such as the original outcome (comma separated).
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    #[command(flatten)]
    fit: FitFlags,
    #[arg(long)]
    out: PathBuf,
}

fn load_for_model(model: &FunctionTree, path: &Path) -> Result<Dataset, Error> {
    dataset::load_csv_with_schema(path, &model.variables, None)
}

fn truth_r2(data: &Dataset, tree: &FunctionTree) -> Result<Option<f64>, Error> {
    let Some(truth) = &data.truth else {
        return Ok(None);
    };
    let pred = tree.predict_dataset(data)?;
    let e = dataset::rmse_target(truth, &pred)?;
    Ok(Some(1.0 - e * e))
}

fn print_summary(tree: &FunctionTree, data: &Dataset, cfg: &FitConfig) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    let s = &tree.stats;
    let _ = writeln!(out, "nodes {}", tree.n_nodes());
    let _ = writeln!(out, "max interaction order {}", tree.max_interaction_order());
    if cfg.max_order == 1 {
        let _ = writeln!(out, "additive only: every node has interaction order 1");
    }
    let _ = writeln!(out, "train rmse {:.6}", s.train_rmse);
    if let Some(t) = s.test_rmse {
        let _ = writeln!(out, "test rmse {t:.6}");
    }
    if let Some(r2) = truth_r2(data, tree)? {
        let _ = writeln!(out, "r2 vs truth {r2:.6}");
    }
    let _ = writeln!(out, "node parent variable order influence");
    for n in tree.nodes() {
        let _ = writeln!(
            out,
            "{:4} {:6} {:>8} {:5} {:.6}",
            n.id,
            n.parent,
            tree.variables[n.var].name,
            tree.interaction_order(n.id)?,
            n.influence
        );
    }
    Ok(())
}

fn write_grid(g: &EffectGrid, tree: &FunctionTree, path: &Path) -> Result<(), Error> {
    g.write_csv(&tree.variables, path)?;
    log::info!("{} points written to {}", g.values.len(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Gen(a) => {
            let d = match a.example {
                Example::Friedman => dataset::gen_friedman(a.n, seed, a.sd_x, a.snr)?,
                Example::HuRegression => dataset::gen_hu(a.n, seed, dataset::HuMode::Regression)?,
                Example::HuClassification => dataset::gen_hu(a.n, seed, dataset::HuMode::Classification)?,
            };
            dataset::write_csv(&d, &a.out)
        }
        Cmd::Fit(a) => {
            let data = a.data.load()?;
            let cfg = a.fit.config(&data, seed)?;
            let tree = function_trees::fit(&data, &cfg)?;
            tree.save(&a.out)?;
            print_summary(&tree, &data, &cfg)
        }
        Cmd::Predict(a) => {
            let tree = FunctionTree::load(&a.model)?;
            let data = load_for_model(&tree, &a.data)?;
            let pred = tree.predict_dataset(&data)?;
            dataset::write_csv_with_extra(&data, &[(a.column.as_str(), &pred)], &a.out)
        }
        Cmd::Effects(a) => {
            let tree = FunctionTree::load(&a.model)?;
            let data = load_for_model(&tree, &a.data)?;
            let opts = SearchOptions {
                max_order: a.max_order,
                use_screens: !a.no_screen,
                h_rel: a.h_threshold,
                r_rel: a.r_threshold,
                context_rows: (a.context_rows > 0).then_some(a.context_rows),
                with_pa: a.pa,
                seed,
            };
            let report = interactions::search_effects(&tree, &data, &opts)?;
            report.write_csv(&tree.variables, &a.out)?;
            let text = report.screening_text(&tree.variables);
            eprint!("{text}");
            if let Some(p) = &a.log {
                std::fs::write(p, &text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?;
            }
            let mut out = std::io::stdout().lock();
            for e in report.ranked().iter().take(10) {
                let names: Vec<&str> = e.subset.iter().map(|&j| tree.variables[j].name.as_str()).collect();
                let _ = writeln!(out, "{:<20} {:.6}", names.join(":"), e.strength);
            }
            Ok(())
        }
        Cmd::Pd(a) => {
            let tree = FunctionTree::load(&a.model)?;
            let data = load_for_model(&tree, &a.data)?;
            let vars = var_indices(&data, &a.vars)?;
            let pts = default_grid(&data, &vars, a.grid);
            let g = if a.pa {
                pdengine::pa(&tree, &vars, &pts, &data)?
            } else {
                pdengine::pd_fast(&tree, &vars, &pts, &data)?
            };
            write_grid(&g, &tree, &a.out)
        }
        Cmd::Interact(a) => {
            let tree = FunctionTree::load(&a.model)?;
            let data = load_for_model(&tree, &a.data)?;
            let vars = var_indices(&data, &a.vars)?;
            let mut cond = Vec::new();
            for g in &a.given {
                let (name, value) = g
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("--given expects name=value, got {g:?}")))?;
                let j = var_index(&data, name)?;
                let v = &data.variables[j];
                let x = if v.is_categorical() {
                    v.levels
                        .iter()
                        .position(|l| l == value.trim())
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown level {value:?} of {name}")))?
                        as f64
                } else {
                    value
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad value in --given {g:?}")))?
                };
                cond.push((j, x));
            }
            let pts = default_grid(&data, &vars, a.grid);
            let g = if cond.is_empty() {
                interactions::pure_interaction(&tree, &vars, &pts, &data)?
            } else {
                interactions::conditional_interaction(&tree, &vars, &cond, &pts, &data)?
            };
            write_grid(&g, &tree, &a.out)
        }
        Cmd::Diff(a) => {
            let ta = FunctionTree::load(&a.a)?;
            let tb = FunctionTree::load(&a.b)?;
            interactions::model_diff(&ta, &tb)?.save(&a.out)
        }
        Cmd::Bootstrap(a) => {
            let data = a.data.load()?;
            let base = a.fit.config(&data, seed)?;
            let configs: Vec<FitConfig> = a
                .orders
                .iter()
                .map(|&o| FitConfig {
                    max_order: o,
                    ..base.clone()
                })
                .collect();
            let res = interactions::bootstrap_compare(&data, &configs, a.reps, seed)?;
            let mut w = csv::Writer::from_path(&a.out).map_err(Error::from)?;
            w.write_record(["max_order", "replicate", "rmse"]).map_err(Error::from)?;
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "max_order median q25 q75");
            for (o, r) in a.orders.iter().zip(&res) {
                for (i, v) in r.rmse.iter().enumerate() {
                    w.write_record([o.to_string(), i.to_string(), dataset::fmt_real(*v)])
                        .map_err(Error::from)?;
                }
                let _ = writeln!(
                    out,
                    "{o} {:.6} {:.6} {:.6}",
                    r.median(),
                    r.quantile(0.25),
                    r.quantile(0.75)
                );
            }
            w.flush()
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", a.out.display())))?;
            Ok(())
        }
        Cmd::Surrogate(a) => {
            let opts = LoadOptions {
                exclude: a.exclude.clone(),
                ..LoadOptions::new(a.pred.clone())
            };
            let data = dataset::load_csv(&a.data, &opts)?;
            let cfg = a.fit.config(&data, seed)?;
            let tree = function_trees::fit(&data, &cfg)?;
            tree.save(&a.out)?;
            let pred = tree.predict_dataset(&data)?;
            let fidelity = dataset::rmse_target(&data.outcome, &pred)?;
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "nodes {}", tree.n_nodes());
            let _ = writeln!(out, "fidelity rmse {fidelity:.6}");
            if let Some(r2) = truth_r2(&data, &tree)? {
                let _ = writeln!(out, "r2 vs truth {r2:.6}");
            }
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
