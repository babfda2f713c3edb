//! Search strategies: random search, TPE and exhaustive grid search.

pub mod grid;
pub mod parzen;
pub mod tpe;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::AlgorithmSpec;
use crate::dataset::{FoldPlan, RatingsTable};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalResult, Metric};
use crate::seed;
use crate::space::{self, ParamAssignment, ParamSpace};

pub use grid::{grid_search, grid_search_objective, Grid, GridOutcome};
pub use parzen::{build_parzen, ParzenDensity};
pub use tpe::{split_trials, tpe_suggest, TpeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

/// One evaluated assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub assignment: ParamAssignment,
    pub loss: Option<f64>,
    pub status: TrialStatus,
    /// Wall seconds for the whole evaluation.
    pub duration: Option<f64>,
    /// Seconds spent fitting, summed over folds.
    pub fit_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    /// Builds an untimed trial. Non-finite losses become failures.
    pub fn new(index: usize, assignment: ParamAssignment, outcome: std::result::Result<f64, String>) -> Self {
        let outcome = match outcome {
            Ok(l) if !l.is_finite() => Err(format!("non-finite loss {l}")),
            other => other,
        };
        let (loss, status, error) = match outcome {
            Ok(l) => (Some(l), TrialStatus::Ok, None),
            Err(e) => (None, TrialStatus::Failed, Some(e)),
        };
        Self {
            index,
            assignment,
            loss,
            status,
            duration: None,
            fit_time: None,
            error,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }

    /// Drops wall-clock measurements so serialized trials are reproducible.
    pub fn strip_timings(&mut self) {
        self.duration = None;
        self.fit_time = None;
    }
}

/// Lowest-loss ok trial, earliest index on ties.
pub fn best_trial(trials: &[Trial]) -> Option<&Trial> {
    trials
        .iter()
        .filter(|t| t.is_ok())
        .min_by(|a, b| a.loss.unwrap().total_cmp(&b.loss.unwrap()).then(a.index.cmp(&b.index)))
}

/// Something to minimize over a parameter space.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn space(&self) -> &ParamSpace;
    fn evaluate(&self, assignment: &ParamAssignment, seed: u64) -> Result<EvalResult>;
}

/// Cross-validated loss of one algorithm on fixed folds.
pub struct AlgorithmObjective<'a> {
    pub algorithm: AlgorithmSpec,
    pub space: ParamSpace,
    pub table: &'a RatingsTable,
    pub folds: &'a FoldPlan,
    pub metric: Metric,
}

impl<'a> AlgorithmObjective<'a> {
    pub fn new(algorithm: AlgorithmSpec, table: &'a RatingsTable, folds: &'a FoldPlan, metric: Metric) -> Self {
        Self {
            algorithm,
            space: space::default_space(algorithm),
            table,
            folds,
            metric,
        }
    }

    pub fn with_space(mut self, space: ParamSpace) -> Self {
        self.space = space;
        self
    }
}

impl Objective for AlgorithmObjective<'_> {
    fn name(&self) -> &str {
        self.algorithm.name()
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn evaluate(&self, assignment: &ParamAssignment, seed: u64) -> Result<EvalResult> {
        metrics::cross_validate(self.algorithm, assignment, self.table, self.folds, self.metric, seed)
    }
}

type LossFn = dyn Fn(&ParamAssignment, u64) -> Result<f64> + Send + Sync;

/// Objective backed by a plain function; handy for synthetic problems.
pub struct FnObjective {
    name: String,
    space: ParamSpace,
    f: Box<LossFn>,
}

impl FnObjective {
    pub fn new(
        name: &str,
        space: ParamSpace,
        f: impl Fn(&ParamAssignment, u64) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.to_owned(),
            space,
            f: Box::new(f),
        }
    }
}

impl Objective for FnObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn evaluate(&self, assignment: &ParamAssignment, seed: u64) -> Result<EvalResult> {
        let started = Instant::now();
        let loss = (self.f)(assignment, seed)?;
        Ok(EvalResult::from_folds(vec![loss], started.elapsed().as_secs_f64(), 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Tpe,
    Random,
}

impl Strategy {
    pub fn suggest<R: Rng + ?Sized>(
        self,
        trials: &[Trial],
        space: &ParamSpace,
        tpe: &TpeConfig,
        rng: &mut R,
    ) -> Result<ParamAssignment> {
        match self {
            Strategy::Tpe => tpe_suggest(trials, space, tpe, rng),
            Strategy::Random => Ok(random_suggest(space, rng)),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tpe" => Ok(Strategy::Tpe),
            "random" => Ok(Strategy::Random),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Tpe => "tpe",
            Strategy::Random => "random",
        })
    }
}

pub fn random_suggest<R: Rng + ?Sized>(space: &ParamSpace, rng: &mut R) -> ParamAssignment {
    space::sample(space, rng)
}

/// Seed for one purpose (`"suggest"` or `"eval"`) of trial `index` of the
/// objective `name`. Independent of scheduling.
pub fn trial_seed(base: u64, name: &str, index: usize, purpose: &str) -> u64 {
    seed::derive(seed::derive(base, name, index as u64), purpose, 0)
}

/// Evaluates one assignment, turning errors into a failed trial.
pub fn evaluate_trial(objective: &dyn Objective, index: usize, assignment: ParamAssignment, seed: u64) -> Trial {
    let started = Instant::now();
    let result = objective.evaluate(&assignment, seed);
    let duration = started.elapsed().as_secs_f64();
    let (outcome, fit_time) = match result {
        Ok(r) => (Ok(r.mean_loss), Some(r.fit_time)),
        Err(e) => (Err(e.to_string()), None),
    };
    let mut trial = Trial::new(index, assignment, outcome);
    trial.duration = Some(duration);
    trial.fit_time = fit_time.or(Some(duration));
    trial
}

/// Proposes and evaluates trial `index` given the history so far.
pub fn next_trial(
    objective: &dyn Objective,
    strategy: Strategy,
    tpe: &TpeConfig,
    history: &[Trial],
    index: usize,
    base_seed: u64,
) -> Result<Trial> {
    let mut rng = seed::rng(trial_seed(base_seed, objective.name(), index, "suggest"));
    let assignment = strategy.suggest(history, objective.space(), tpe, &mut rng)?;
    let eval_seed = trial_seed(base_seed, objective.name(), index, "eval");
    Ok(evaluate_trial(objective, index, assignment, eval_seed))
}

/// Sequentially runs `n_trials` trials. An empty space is evaluated once.
pub fn minimize(
    objective: &dyn Objective,
    strategy: Strategy,
    tpe: &TpeConfig,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<Trial>> {
    objective.space().validate()?;
    let n = if objective.space().is_empty() { n_trials.min(1) } else { n_trials };
    let mut trials = Vec::with_capacity(n);
    for index in 0..n {
        let t = next_trial(objective, strategy, tpe, &trials, index, seed)?;
        trials.push(t);
    }
    Ok(trials)
}
