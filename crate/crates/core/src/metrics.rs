//! Accuracy metrics and k-fold cross-validation.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::{self, AlgorithmSpec, Trainset};
use crate::dataset::{FoldPlan, RatingsTable};
use crate::error::{Error, Result};
use crate::seed;
use crate::space::ParamAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rmse,
    Mae,
}

impl Metric {
    pub fn compute(self, pairs: &[(f64, f64)]) -> Result<f64> {
        match self {
            Metric::Rmse => rmse(pairs),
            Metric::Mae => mae(pairs),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rmse" => Ok(Metric::Rmse),
            "mae" => Ok(Metric::Mae),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Rmse => "RMSE",
            Metric::Mae => "MAE",
        })
    }
}

fn check_pairs(pairs: &[(f64, f64)]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("metric over zero predictions".into()));
    }
    Ok(())
}

/// Root mean squared error over `(predicted, actual)` pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    check_pairs(pairs)?;
    let sse: f64 = pairs.iter().map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pairs.len() as f64).sqrt())
}

/// Mean absolute error over `(predicted, actual)` pairs.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    check_pairs(pairs)?;
    let sae: f64 = pairs.iter().map(|(p, a)| (p - a).abs()).sum();
    Ok(sae / pairs.len() as f64)
}

/// Outcome of one cross-validated evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean_loss: f64,
    pub per_fold_losses: Vec<f64>,
    /// Seconds spent fitting, summed over folds.
    pub fit_time: f64,
    /// Seconds spent scoring test pairs, summed over folds.
    pub test_time: f64,
}

impl EvalResult {
    pub fn from_folds(per_fold_losses: Vec<f64>, fit_time: f64, test_time: f64) -> Self {
        let mean_loss = per_fold_losses.iter().sum::<f64>() / per_fold_losses.len().max(1) as f64;
        Self {
            mean_loss,
            per_fold_losses,
            fit_time,
            test_time,
        }
    }
}

/// Fits `algo` on each training split and scores its test fold, computing
/// every metric in `metrics` from the same predictions. Fold `f` is fitted
/// with a seed derived from `(seed, f)`.
pub fn cross_validate_metrics(
    algo: AlgorithmSpec,
    assignment: &ParamAssignment,
    table: &RatingsTable,
    folds: &FoldPlan,
    metrics: &[Metric],
    seed: u64,
) -> Result<Vec<EvalResult>> {
    if folds.assignments.len() != table.n_ratings() {
        return Err(Error::InvalidArgument(format!(
            "fold plan covers {} ratings, table has {}",
            folds.assignments.len(),
            table.n_ratings()
        )));
    }
    let mut losses = vec![Vec::with_capacity(folds.k); metrics.len()];
    let (mut fit_time, mut test_time) = (0.0, 0.0);
    for fold in 0..folds.k {
        let tag = |e: Error| Error::Fold {
            fold,
            source: Box::new(e),
        };
        let started = Instant::now();
        let train = Trainset::from_indices(table, &folds.train_indices(fold));
        let model = algorithms::fit(algo, assignment, &train, seed::derive(seed, "fold", fold as u64))
            .map_err(tag)?;
        fit_time += started.elapsed().as_secs_f64();

        let started = Instant::now();
        let ratings = table.ratings();
        let pairs: Vec<(f64, f64)> = folds
            .test_indices(fold)
            .into_iter()
            .map(|k| {
                let r = ratings[k];
                (model.score(Some(r.user), Some(r.item)).value, r.value)
            })
            .collect();
        for (metric, out) in metrics.iter().zip(&mut losses) {
            out.push(metric.compute(&pairs).map_err(tag)?);
        }
        test_time += started.elapsed().as_secs_f64();
    }
    Ok(losses
        .into_iter()
        .map(|l| EvalResult::from_folds(l, fit_time, test_time))
        .collect())
}

/// Cross-validated loss of one metric.
pub fn cross_validate(
    algo: AlgorithmSpec,
    assignment: &ParamAssignment,
    table: &RatingsTable,
    folds: &FoldPlan,
    metric: Metric,
    seed: u64,
) -> Result<EvalResult> {
    let mut all = cross_validate_metrics(algo, assignment, table, folds, &[metric], seed)?;
    Ok(all.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{kfold_split, RatingScale};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_predictions_score_zero() {
        let pairs = [(3.0, 3.0), (1.5, 1.5)];
        assert_eq!(rmse(&pairs).unwrap(), 0.0);
        assert_eq!(mae(&pairs).unwrap(), 0.0);
    }

    #[test]
    fn analytic_values() {
        let unit = [(4.0, 3.0), (2.0, 3.0), (5.0, 4.0), (1.0, 2.0)];
        assert_eq!(rmse(&unit).unwrap(), 1.0);
        assert_eq!(mae(&[(5.0, 3.0), (1.0, 3.0)]).unwrap(), 2.0);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(rmse(&[]).is_err());
        assert!(mae(&[]).is_err());
    }

    fn table(values: impl Fn(usize, usize) -> f64) -> RatingsTable {
        let triples = (0..30).flat_map(|u| (0..12).map(move |i| (u, i))).filter_map(|(u, i)| {
            ((u * 5 + i * 7) % 3 != 0).then(|| (u.to_string(), i.to_string(), values(u, i)))
        });
        RatingsTable::from_triples(triples, RatingScale::new(1.0, 5.0).unwrap()).unwrap()
    }

    #[test]
    fn constant_data_baseline_is_exact() {
        let t = table(|_, _| 4.0);
        let folds = kfold_split(&t, 3, 1).unwrap();
        for algo in [AlgorithmSpec::BaselineOnly, AlgorithmSpec::NormalPredictor] {
            let res = cross_validate(algo, &ParamAssignment::new(), &t, &folds, Metric::Rmse, 0).unwrap();
            assert_abs_diff_eq!(res.mean_loss, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn repeatable_and_mean_of_folds() {
        let t = table(|u, i| 1.0 + ((u * 3 + i) % 5) as f64);
        let folds = kfold_split(&t, 4, 9).unwrap();
        for algo in AlgorithmSpec::ALL {
            let a = cross_validate(algo, &ParamAssignment::new(), &t, &folds, Metric::Mae, 5).unwrap();
            let b = cross_validate(algo, &ParamAssignment::new(), &t, &folds, Metric::Mae, 5).unwrap();
            assert_eq!(a.per_fold_losses, b.per_fold_losses, "{algo}");
            assert_eq!(a.mean_loss, a.per_fold_losses.iter().sum::<f64>() / 4.0);
            assert!(a.per_fold_losses.iter().all(|l| *l >= 0.0));
        }
    }

    #[test]
    fn fold_errors_carry_the_fold_index() {
        let t = table(|u, i| 1.0 + ((u + i) % 5) as f64);
        let folds = kfold_split(&t, 3, 2).unwrap();
        let bad = ParamAssignment::new().with("lr", 1e6).with("n_factors", 3);
        match cross_validate(AlgorithmSpec::Svd, &bad, &t, &folds, Metric::Rmse, 0) {
            Err(Error::Fold { fold: 0, source }) => assert!(matches!(*source, Error::Diverged { .. })),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae_and_ignores_order(
            mut pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50),
            rot in 0usize..50,
        ) {
            let (r, m) = (rmse(&pairs).unwrap(), mae(&pairs).unwrap());
            prop_assert!(r >= m - 1e-12);
            let k = rot % pairs.len();
            pairs.rotate_left(k);
            pairs.reverse();
            prop_assert!((rmse(&pairs).unwrap() - r).abs() <= 1e-12 * r.max(1.0));
            prop_assert!((mae(&pairs).unwrap() - m).abs() <= 1e-12 * m.max(1.0));
        }
    }
}
