//! Algorithm selection: baseline scoring, parallel budgeted optimization of
//! every candidate, gating against the baseline, and winner selection.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::algorithms::AlgorithmSpec;
use crate::dataset::{kfold_split, FoldPlan, RatingsTable};
use crate::error::{Error, Result};
use crate::metrics::{self, Metric};
use crate::optimize::{self, best_trial, AlgorithmObjective, Objective, Strategy, TpeConfig, Trial};
use crate::space::{ParamAssignment, ParamSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub metric: Metric,
    /// Global wall-clock limit in seconds.
    pub time_budget: Option<f64>,
    pub max_evals_per_algorithm: Option<usize>,
    pub strategy: Strategy,
    pub gate_evals: usize,
    pub algorithms: Vec<AlgorithmSpec>,
    pub parallelism: usize,
    pub seed: u64,
    pub cv_folds: usize,
    pub tpe: TpeConfig,
    /// Replacement search spaces keyed by algorithm name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub spaces: BTreeMap<String, ParamSpace>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Rmse,
            time_budget: Some(3600.0),
            max_evals_per_algorithm: None,
            strategy: Strategy::Tpe,
            gate_evals: 10,
            algorithms: AlgorithmSpec::ALL.to_vec(),
            parallelism: AlgorithmSpec::ALL.len(),
            seed: 0,
            cv_folds: 3,
            tpe: TpeConfig::default(),
            spaces: BTreeMap::new(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        let timed = self.time_budget.is_some_and(|t| t > 0.0);
        let counted = self.max_evals_per_algorithm.is_some_and(|n| n > 0);
        if !timed && !counted {
            return bad("a positive time budget or max evaluations limit is required");
        }
        if self.time_budget.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return bad("time budget must be positive");
        }
        if self.max_evals_per_algorithm == Some(0) {
            return bad("max evaluations must be positive");
        }
        if self.gate_evals == 0 {
            return bad("gate evaluations must be at least 1");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.cv_folds < 2 {
            return bad("cross-validation needs at least 2 folds");
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected");
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return bad("algorithm list contains duplicates");
        }
        for (name, space) in &self.spaces {
            let algo: AlgorithmSpec = name.parse()?;
            if !self.algorithms.contains(&algo) {
                return Err(Error::InvalidArgument(format!("space given for unselected algorithm {name}")));
            }
            space.validate()?;
        }
        self.tpe.validate()
    }

    /// Search space for `algo`, honoring overrides.
    pub fn space_for(&self, algo: AlgorithmSpec) -> ParamSpace {
        self.spaces
            .iter()
            .find(|(name, _)| name.parse::<AlgorithmSpec>().ok() == Some(algo))
            .map(|(_, s)| s.clone())
            .unwrap_or_else(|| crate::space::default_space(algo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Completed,
    Pruned,
    TimedOut,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmOutcome {
    pub name: String,
    pub status: OutcomeStatus,
    pub best_trial: Option<Trial>,
    pub n_trials: usize,
    pub trial_history: Vec<Trial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AlgorithmOutcome {
    fn new(name: &str, status: OutcomeStatus, trial_history: Vec<Trial>, error: Option<String>) -> Self {
        Self {
            name: name.to_owned(),
            status,
            best_trial: best_trial(&trial_history).cloned(),
            n_trials: trial_history.len(),
            trial_history,
            error,
        }
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best_trial.as_ref().and_then(|t| t.loss)
    }

    /// Mean fit time over successful trials, when timings were kept.
    pub fn mean_fit_time(&self) -> Option<f64> {
        let times: Vec<f64> = self
            .trial_history
            .iter()
            .filter(|t| t.is_ok())
            .filter_map(|t| t.fit_time)
            .collect();
        (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub algorithm: String,
    pub assignment: ParamAssignment,
    pub loss: f64,
    /// Set when nothing beat the baseline and the baseline itself is returned.
    pub baseline_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub baseline_loss: f64,
    pub outcomes: BTreeMap<String, AlgorithmOutcome>,
    pub winner: Winner,
    #[serde(rename = "wall_time_s")]
    pub wall_time: Option<f64>,
}

impl SelectionReport {
    /// Drops every wall-clock measurement.
    pub fn strip_timings(&mut self) {
        self.wall_time = None;
        for o in self.outcomes.values_mut() {
            o.trial_history.iter_mut().for_each(Trial::strip_timings);
            if let Some(t) = o.best_trial.as_mut() {
                t.strip_timings();
            }
        }
    }
}

/// Emitted on the coordinating thread after every finished trial.
#[derive(Debug, Clone)]
pub struct TrialEvent<'a> {
    pub algorithm: &'a str,
    pub trial: &'a Trial,
    pub best_so_far: Option<f64>,
}

fn baseline_seed(seed: u64) -> u64 {
    optimize::trial_seed(seed, "baseline", 0, "eval")
}

/// Cross-validated loss of the Normal Predictor on `folds`.
pub fn baseline_on_folds(table: &RatingsTable, folds: &FoldPlan, metric: Metric, seed: u64) -> Result<f64> {
    let r = metrics::cross_validate(
        AlgorithmSpec::NormalPredictor,
        &ParamAssignment::new(),
        table,
        folds,
        metric,
        baseline_seed(seed),
    )?;
    Ok(r.mean_loss)
}

/// Baseline loss on the same folds `run_selection` would use.
pub fn compute_baseline(table: &RatingsTable, metric: Metric, cv_folds: usize, seed: u64) -> Result<f64> {
    let folds = kfold_split(table, cv_folds, seed)?;
    baseline_on_folds(table, &folds, metric, seed)
}

/// Runs the whole selection on `table`.
pub fn run_selection(
    config: &SelectionConfig,
    table: &RatingsTable,
    progress: impl FnMut(&TrialEvent<'_>),
) -> Result<SelectionReport> {
    let clock = Instant::now();
    config.validate()?;
    let folds = kfold_split(table, config.cv_folds, config.seed)?;
    let baseline = baseline_on_folds(table, &folds, config.metric, config.seed)?;
    let objectives: Vec<AlgorithmObjective<'_>> = config
        .algorithms
        .iter()
        .map(|&algo| {
            AlgorithmObjective::new(algo, table, &folds, config.metric).with_space(config.space_for(algo))
        })
        .collect();
    let refs: Vec<&dyn Objective> = objectives.iter().map(|o| o as &dyn Objective).collect();
    run_objectives(&refs, baseline, config, clock, progress)
}

enum Message {
    Trial(usize, Trial),
    Done(usize, AlgorithmOutcome),
}

struct Shared<'a> {
    config: &'a SelectionConfig,
    baseline: f64,
    deadline: Option<Instant>,
    stop: AtomicBool,
}

impl Shared<'_> {
    fn expired(&self) -> bool {
        if self.stop.load(Ordering::SeqCst) {
            return true;
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.stop.store(true, Ordering::SeqCst);
            return true;
        }
        false
    }
}

/// Optimizes every objective under the limits in `config` and picks the
/// winner. Budgets are measured from `clock`. Only the limit, gating,
/// strategy, TPE, parallelism and seed fields of `config` are used.
pub fn run_objectives(
    objectives: &[&dyn Objective],
    baseline_loss: f64,
    config: &SelectionConfig,
    clock: Instant,
    mut progress: impl FnMut(&TrialEvent<'_>),
) -> Result<SelectionReport> {
    for o in objectives {
        o.space().validate()?;
    }
    let shared = Shared {
        config,
        baseline: baseline_loss,
        deadline: config
            .time_budget
            .map(|s| clock + Duration::from_secs_f64(s)),
        stop: AtomicBool::new(false),
    };
    let next = AtomicUsize::new(0);
    let mut outcomes = BTreeMap::new();
    let mut best: Vec<Option<f64>> = vec![None; objectives.len()];

    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..config.parallelism.min(objectives.len()) {
            let tx = tx.clone();
            let (shared, next) = (&shared, &next);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&objective) = objectives.get(k) else {
                    break;
                };
                let outcome = optimize_one(objective, shared, |t| {
                    let _ = tx.send(Message::Trial(k, t.clone()));
                });
                let _ = tx.send(Message::Done(k, outcome));
            });
        }
        drop(tx);
        for msg in rx {
            match msg {
                Message::Trial(k, trial) => {
                    if let Some(l) = trial.loss {
                        best[k] = Some(best[k].map_or(l, |b: f64| b.min(l)));
                    }
                    progress(&TrialEvent {
                        algorithm: objectives[k].name(),
                        trial: &trial,
                        best_so_far: best[k],
                    });
                }
                Message::Done(k, outcome) => {
                    outcomes.insert(objectives[k].name().to_owned(), outcome);
                }
            }
        }
    });

    let winner = pick_winner(&outcomes, baseline_loss);
    Ok(SelectionReport {
        baseline_loss,
        outcomes,
        winner,
        wall_time: Some(clock.elapsed().as_secs_f64()),
    })
}

fn optimize_one(objective: &dyn Objective, shared: &Shared<'_>, mut on_trial: impl FnMut(&Trial)) -> AlgorithmOutcome {
    let config = shared.config;
    let name = objective.name();
    let limit = if objective.space().is_empty() {
        Some(1)
    } else {
        config.max_evals_per_algorithm
    };
    let mut history: Vec<Trial> = Vec::new();
    loop {
        if limit.is_some_and(|n| history.len() >= n) {
            break;
        }
        if shared.expired() {
            return AlgorithmOutcome::new(name, OutcomeStatus::TimedOut, history, None);
        }
        let index = history.len();
        let trial = match optimize::next_trial(objective, config.strategy, &config.tpe, &history, index, config.seed) {
            Ok(t) => t,
            Err(e) => return AlgorithmOutcome::new(name, OutcomeStatus::Failed, history, Some(e.to_string())),
        };
        on_trial(&trial);
        history.push(trial);
        if history.len() == config.gate_evals {
            match best_trial(&history).and_then(|t| t.loss) {
                None => break,
                Some(b) if b >= shared.baseline => {
                    return AlgorithmOutcome::new(name, OutcomeStatus::Pruned, history, None);
                }
                Some(_) => {}
            }
        }
    }
    let status = if history.iter().any(Trial::is_ok) {
        OutcomeStatus::Completed
    } else {
        OutcomeStatus::Failed
    };
    let error = (status == OutcomeStatus::Failed)
        .then(|| history.last().and_then(|t| t.error.clone()))
        .flatten();
    AlgorithmOutcome::new(name, status, history, error)
}

/// Lowest best loss, then shorter mean fit time, then name. Falls back to the
/// baseline when nothing beat it.
fn pick_winner(outcomes: &BTreeMap<String, AlgorithmOutcome>, baseline_loss: f64) -> Winner {
    let best = outcomes
        .values()
        .filter_map(|o| Some((o, o.best_loss()?)))
        .min_by(|(a, la), (b, lb)| {
            la.total_cmp(lb)
                .then_with(|| {
                    let fa = a.mean_fit_time().unwrap_or(f64::INFINITY);
                    let fb = b.mean_fit_time().unwrap_or(f64::INFINITY);
                    fa.total_cmp(&fb)
                })
                .then_with(|| a.name.cmp(&b.name))
        });
    match best {
        Some((o, loss)) if loss < baseline_loss => Winner {
            algorithm: o.name.clone(),
            assignment: o.best_trial.as_ref().expect("best loss implies a trial").assignment.clone(),
            loss,
            baseline_fallback: false,
        },
        _ => Winner {
            algorithm: AlgorithmSpec::NormalPredictor.name().to_owned(),
            assignment: ParamAssignment::new(),
            loss: baseline_loss,
            baseline_fallback: true,
        },
    }
}
