//! Command-line driver. Exit codes: 0 success, 1 output could not be
//! written, 2 bad arguments, 3 dataset error, 4 the run itself failed or
//! nothing beat the baseline.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::algorithms::AlgorithmSpec;
use crate::dataset::{self, Column, Delimiter, FormatSpec, Preset, RatingScale, RatingsTable};
use crate::error::Error;
use crate::metrics::{self, Metric};
use crate::optimize::{self, AlgorithmObjective, Grid, Strategy, TpeConfig, Trial};
use crate::orchestrate::{self, SelectionConfig, SelectionReport, TrialEvent};
use crate::report::{
    DatasetDigest, EvaluateConfig, EvaluatePayload, GridConfig, GridPayload, RunManifest,
};
use crate::space::{self, ParamAssignment, ParamSpace, ParamValue};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_FAILED: i32 = 4;

/// Default time budget when neither a budget nor an evaluation cap is given.
pub const DEFAULT_TIME_BUDGET: f64 = 3600.0;

#[derive(Debug, Parser)]
#[command(name = "autorec", version, about = "Automatic selection and tuning of rating predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize every candidate algorithm and report the best one.
    Auto(AutoArgs),
    /// Cross-validate one algorithm with default or given parameters.
    Evaluate(EvaluateArgs),
    /// Exhaustive grid search for one algorithm.
    Grid(GridArgs),
    /// Write a seeded uniform sample of a ratings file.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Ratings file.
    #[arg(long)]
    data: PathBuf,
    /// Built-in layout: ml100k, jester or bookcrossing (default ml100k).
    #[arg(long)]
    preset: Option<String>,
    /// Field separator; `tab` and `whitespace` are accepted by name.
    #[arg(long)]
    sep: Option<String>,
    /// Comma separated column roles, e.g. `user,item,rating,skip`.
    #[arg(long)]
    cols: Option<String>,
    /// Rating scale as `min,max`.
    #[arg(long)]
    scale: Option<String>,
    /// The file starts with a header line.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct AutoArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "rmse")]
    metric: String,
    #[arg(long, default_value = "tpe")]
    strategy: String,
    /// Global wall-clock budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Maximum trials per algorithm.
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long, default_value_t = 10)]
    gate_evals: usize,
    #[arg(long, default_value_t = 3)]
    cv_folds: usize,
    /// Concurrent workers (default: one per algorithm).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma separated algorithm names (default: all).
    #[arg(long)]
    algos: Option<String>,
    #[arg(long, default_value = "autorec_report.json")]
    out: PathBuf,
    /// JSON file mapping algorithm names to replacement search spaces.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Keep wall-clock measurements in the report even without a time budget.
    #[arg(long)]
    timings: bool,
    /// Suppress per-trial progress lines.
    #[arg(long)]
    quiet: bool,
    #[arg(long, default_value_t = TpeConfig::default().n_startup)]
    tpe_startup: usize,
    #[arg(long, default_value_t = TpeConfig::default().gamma)]
    tpe_gamma: f64,
    #[arg(long, default_value_t = TpeConfig::default().n_candidates)]
    tpe_candidates: usize,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    algo: String,
    /// JSON object of parameter values; missing ones take defaults.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    algo: String,
    /// JSON file mapping parameter names to value lists (default: built-in grid).
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value = "rmse")]
    metric: String,
    #[arg(long, default_value_t = 3)]
    cv_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "grid_report.json")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Keep the first line as a header.
    #[arg(long)]
    header: bool,
}

/// A failed command and its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    fn data(e: impl ToString) -> Self {
        Self {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }

    fn failed(e: impl ToString) -> Self {
        Self {
            code: EXIT_FAILED,
            message: e.to_string(),
        }
    }

    fn output(e: impl ToString) -> Self {
        Self {
            code: EXIT_OUTPUT,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let echo: Vec<String> = std::iter::once("autorec".to_owned())
        .chain(args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect();
    let result = match cli.command {
        Command::Auto(a) => cmd_auto(a, echo),
        Command::Evaluate(a) => cmd_evaluate(a, echo),
        Command::Grid(a) => cmd_grid(a, echo),
        Command::Sample(a) => cmd_sample(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn resolve_format(args: &DataArgs) -> std::result::Result<FormatSpec, Failure> {
    let preset: Preset = args.preset.as_deref().unwrap_or("ml100k").parse().map_err(Failure::usage)?;
    let mut f = preset.format();
    if let Some(sep) = &args.sep {
        f.delimiter = sep.parse::<Delimiter>().map_err(Failure::usage)?;
    }
    let columns = match &args.cols {
        Some(cols) => cols
            .split(',')
            .map(str::parse::<Column>)
            .collect::<crate::Result<Vec<_>>>()
            .map_err(Failure::usage)?,
        None => f.columns.clone(),
    };
    let scale = match &args.scale {
        Some(s) => s.parse::<RatingScale>().map_err(Failure::usage)?,
        None => f.scale,
    };
    FormatSpec::new(f.delimiter, columns, f.header || args.header, scale).map_err(Failure::usage)
}

fn load(args: &DataArgs) -> std::result::Result<(FormatSpec, RatingsTable), Failure> {
    let format = resolve_format(args)?;
    let table = dataset::load_ratings(&args.data, &format).map_err(Failure::data)?;
    Ok((format, table))
}

fn read_text(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn parse_algos(list: &str) -> std::result::Result<Vec<AlgorithmSpec>, Failure> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<AlgorithmSpec>().map_err(Failure::usage))
        .collect()
}

/// Parses `{"name": value, ...}` into an assignment.
fn parse_params(text: &str) -> std::result::Result<ParamAssignment, Failure> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Failure::usage(format!("--params: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Failure::usage("--params must be a JSON object"))?;
    let mut a = ParamAssignment::new();
    for (k, v) in obj {
        let v = ParamValue::from_json(v).ok_or_else(|| Failure::usage(format!("--params: unsupported value for `{k}`")))?;
        a.insert(k, v);
    }
    Ok(a)
}

fn write_manifest<C, P>(manifest: &RunManifest<C, P>, out: &Path) -> std::result::Result<(), Failure>
where
    C: Serialize + for<'de> Deserialize<'de>,
    P: Serialize + for<'de> Deserialize<'de>,
{
    manifest.write(out).map_err(Failure::output)
}

fn fmt_loss(l: Option<f64>) -> String {
    l.map_or_else(|| "-".to_owned(), |l| format!("{l:.4}"))
}

/// Settings recorded in the `auto` manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoConfig {
    #[serde(flatten)]
    pub selection: SelectionConfig,
    pub timings: bool,
}

fn cmd_auto(args: AutoArgs, echo: Vec<String>) -> CmdResult {
    let metric: Metric = args.metric.parse().map_err(Failure::usage)?;
    let strategy: Strategy = args.strategy.parse().map_err(Failure::usage)?;
    let algorithms = match &args.algos {
        Some(list) => parse_algos(list)?,
        None => AlgorithmSpec::ALL.to_vec(),
    };
    let time_budget = match (args.time_budget, args.max_evals) {
        (None, None) => Some(DEFAULT_TIME_BUDGET),
        (t, _) => t,
    };
    let spaces = match &args.space {
        Some(path) => {
            let raw: BTreeMap<String, ParamSpace> = serde_json::from_str(&read_text(path)?)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let mut spaces = BTreeMap::new();
            for (name, s) in raw {
                let algo: AlgorithmSpec = name.parse().map_err(Failure::usage)?;
                spaces.insert(algo.name().to_owned(), s);
            }
            spaces
        }
        None => BTreeMap::new(),
    };
    let selection = SelectionConfig {
        metric,
        time_budget,
        max_evals_per_algorithm: args.max_evals,
        strategy,
        gate_evals: args.gate_evals,
        parallelism: args.jobs.unwrap_or(algorithms.len()),
        algorithms,
        seed: args.seed,
        cv_folds: args.cv_folds,
        tpe: TpeConfig {
            n_startup: args.tpe_startup,
            gamma: args.tpe_gamma,
            n_candidates: args.tpe_candidates,
        },
        spaces,
    };
    selection.validate().map_err(Failure::usage)?;
    let (format, table) = load(&args.data)?;
    if args.cv_folds > table.n_ratings() {
        return Err(Failure::usage(format!(
            "{} folds requested for {} ratings",
            args.cv_folds,
            table.n_ratings()
        )));
    }

    let quiet = args.quiet;
    let mut report = orchestrate::run_selection(&selection, &table, |e: &TrialEvent<'_>| {
        if !quiet {
            eprintln!(
                "{} #{}: {} {} (best {})",
                e.algorithm,
                e.trial.index,
                metric,
                e.trial.loss.map_or_else(|| "failed".to_owned(), |l| format!("{l:.4}")),
                fmt_loss(e.best_so_far)
            );
        }
    })
    .map_err(Failure::failed)?;
    let timings = args.timings || selection.time_budget.is_some();
    if !timings {
        report.strip_timings();
    }

    print!("{}", auto_summary(&report, metric));
    let code = if report.winner.baseline_fallback {
        EXIT_FAILED
    } else {
        EXIT_OK
    };
    let digest = DatasetDigest::new(&args.data.data.display().to_string(), &format, &table);
    let config = AutoConfig { selection, timings };
    write_manifest(&RunManifest::new(echo, config, digest, report), &args.out)?;
    Ok(code)
}

fn auto_summary(report: &SelectionReport, metric: Metric) -> String {
    let mut s = String::new();
    let w = &report.winner;
    if w.baseline_fallback {
        let _ = writeln!(s, "no algorithm beat the baseline; returning {}", w.algorithm);
    }
    let _ = writeln!(s, "winner: {} {} {:.4}", w.algorithm, metric, w.loss);
    let _ = writeln!(s, "params: {}", w.assignment);
    let _ = writeln!(s, "baseline {}: {:.4}", metric, report.baseline_loss);
    let _ = writeln!(s, "{:<16} {:<10} {:>6} {:>10}", "algorithm", "status", "trials", "best");
    for o in report.outcomes.values() {
        let status = serde_json::to_value(o.status).ok();
        let status = status.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
        let _ = writeln!(s, "{:<16} {:<10} {:>6} {:>10}", o.name, status, o.n_trials, fmt_loss(o.best_loss()));
    }
    s
}

fn cmd_evaluate(args: EvaluateArgs, echo: Vec<String>) -> CmdResult {
    let algo: AlgorithmSpec = args.algo.parse().map_err(Failure::usage)?;
    let params = match &args.params {
        Some(p) => parse_params(p)?,
        None => ParamAssignment::new(),
    };
    // explicit values may lie outside the search ranges; names and kinds must fit
    let as_grid = params.iter().fold(Grid::new(), |g, (k, v)| g.with(k, vec![v.clone()]));
    as_grid.validate(&space::default_space(algo)).map_err(Failure::usage)?;
    let (format, table) = load(&args.data)?;
    let folds = dataset::kfold_split(&table, args.cv_folds, args.seed).map_err(Failure::usage)?;
    let results = metrics::cross_validate_metrics(algo, &params, &table, &folds, &[Metric::Rmse, Metric::Mae], args.seed)
        .map_err(|e| match e {
            Error::Fold { ref source, .. } if matches!(**source, Error::InvalidParam { .. }) => Failure::usage(e),
            e => Failure::failed(e),
        })?;
    let [rmse, mae]: [_; 2] = results.try_into().expect("two metrics requested");
    println!("algorithm: {}", algo.name());
    println!("RMSE: {:.4}", rmse.mean_loss);
    println!("MAE: {:.4}", mae.mean_loss);
    println!("fit time: {:.2}s  test time: {:.2}s", rmse.fit_time, rmse.test_time);
    if let Some(out) = &args.out {
        let config = EvaluateConfig {
            algorithm: algo.name().to_owned(),
            params,
            cv_folds: args.cv_folds,
            seed: args.seed,
        };
        let digest = DatasetDigest::new(&args.data.data.display().to_string(), &format, &table);
        write_manifest(&RunManifest::new(echo, config, digest, EvaluatePayload { rmse, mae }), out)?;
    }
    Ok(EXIT_OK)
}

fn cmd_grid(args: GridArgs, echo: Vec<String>) -> CmdResult {
    let algo: AlgorithmSpec = args.algo.parse().map_err(Failure::usage)?;
    let metric: Metric = args.metric.parse().map_err(Failure::usage)?;
    let grid = match &args.grid {
        Some(path) => Grid::from_json(&read_text(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        None => Grid::default_for(algo)
            .ok_or_else(|| Failure::usage(format!("no built-in grid for {}; pass --grid", algo.name())))?,
    };
    let objective_space = space::default_space(algo);
    grid.validate(&objective_space).map_err(Failure::usage)?;
    let (format, table) = load(&args.data)?;
    let folds = dataset::kfold_split(&table, args.cv_folds, args.seed).map_err(Failure::usage)?;
    let objective = AlgorithmObjective::new(algo, &table, &folds, metric);
    let quiet = args.quiet;
    let total = grid.len();
    let outcome = optimize::grid_search_objective(&objective, &grid, args.seed, |t: &Trial| {
        if !quiet {
            eprintln!("{} grid {}/{}: {} {}", algo.name(), t.index + 1, total, metric, fmt_loss(t.loss));
        }
    })
    .map_err(Failure::failed)?;
    println!("algorithm: {}", algo.name());
    println!("best {}: {:.4}", metric, outcome.best.loss.expect("best trial is ok"));
    println!("params: {}", outcome.best.assignment);
    println!("trials: {}  wall time: {:.1}s", outcome.trials.len(), outcome.wall_time);
    let config = GridConfig {
        algorithm: algo.name().to_owned(),
        metric,
        grid,
        cv_folds: args.cv_folds,
        seed: args.seed,
    };
    let digest = DatasetDigest::new(&args.data.data.display().to_string(), &format, &table);
    let payload = GridPayload {
        best: outcome.best,
        trials: outcome.trials,
        wall_time_s: outcome.wall_time,
    };
    write_manifest(&RunManifest::new(echo, config, digest, payload), &args.out)?;
    Ok(EXIT_OK)
}

fn cmd_sample(args: SampleArgs) -> CmdResult {
    let bytes = std::fs::read(&args.source).map_err(|e| Failure::data(format!("{}: {e}", args.source.display())))?;
    let text = String::from_utf8_lossy(&bytes);
    let sample = dataset::sample_rows(&text, args.n, args.header, args.seed).map_err(Failure::usage)?;
    std::fs::write(&args.out, sample).map_err(|e| Failure::output(format!("{}: {e}", args.out.display())))?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_args(extra: &[&str]) -> DataArgs {
        let mut argv = vec!["autorec", "evaluate", "--algo", "svd", "--data", "x"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Evaluate(a) => a.data,
            _ => unreachable!(),
        }
    }

    #[test]
    fn format_defaults_to_ml100k() {
        assert_eq!(resolve_format(&data_args(&[])).unwrap(), Preset::Ml100k.format());
    }

    #[test]
    fn explicit_format_overrides() {
        let f = resolve_format(&data_args(&["--sep", ",", "--cols", "item,user,rating", "--scale", "0.5,5"])).unwrap();
        assert_eq!(f.delimiter, Delimiter::Text(",".into()));
        assert_eq!(f.columns, vec![Column::Item, Column::User, Column::Rating]);
        assert_eq!(f.scale, RatingScale::new(0.5, 5.0).unwrap());
        assert_eq!(resolve_format(&data_args(&["--cols", "user,item"])).unwrap_err().code, EXIT_USAGE);
        assert_eq!(resolve_format(&data_args(&["--preset", "netflix"])).unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn params_parse() {
        let a = parse_params(r#"{"k": 20, "sim": "pearson", "lr": 0.01}"#).unwrap();
        assert_eq!(a.count("k").unwrap(), Some(20));
        assert_eq!(a.label("sim").unwrap(), Some("pearson"));
        assert!(parse_params("[1]").is_err());
        assert!(parse_params(r#"{"k": [1]}"#).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["autorec"]), EXIT_USAGE);
        assert_eq!(run(["autorec", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["autorec", "evaluate", "--algo", "nope", "--data", "x"]), EXIT_USAGE);
        assert_eq!(run(["autorec", "--version"]), EXIT_OK);
    }
}
