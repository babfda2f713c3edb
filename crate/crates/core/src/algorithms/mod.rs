//! Rating predictors.
//!
//! Every algorithm fits an [`Estimator`] on a [`Trainset`]; [`FittedModel`]
//! wraps it with the shared fallback and clipping rules so that every score is
//! finite and inside the rating scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{RatingScale, RatingsTable};
use crate::error::{Error, Result};
use crate::space::ParamAssignment;

pub mod baseline;
pub mod coclustering;
pub mod knn;
pub mod nmf;
pub mod normal;
pub mod similarity;
pub mod slope_one;
pub mod svd;

pub use baseline::{fit_baselines, BaselineMethod, Baselines};
pub use similarity::{compute_similarity, SimKind, SimOptions, SimilarityMatrix};

/// The eleven supported predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlgorithmSpec {
    NormalPredictor,
    BaselineOnly,
    #[serde(rename = "KNNBasic")]
    KnnBasic,
    #[serde(rename = "KNNWithMeans")]
    KnnWithMeans,
    #[serde(rename = "KNNWithZScore")]
    KnnWithZScore,
    #[serde(rename = "KNNBaseline")]
    KnnBaseline,
    #[serde(rename = "SVD")]
    Svd,
    #[serde(rename = "SVDpp")]
    SvdPp,
    #[serde(rename = "NMF")]
    Nmf,
    SlopeOne,
    CoClustering,
}

impl AlgorithmSpec {
    pub const ALL: [AlgorithmSpec; 11] = [
        AlgorithmSpec::NormalPredictor,
        AlgorithmSpec::BaselineOnly,
        AlgorithmSpec::KnnBasic,
        AlgorithmSpec::KnnWithMeans,
        AlgorithmSpec::KnnWithZScore,
        AlgorithmSpec::KnnBaseline,
        AlgorithmSpec::Svd,
        AlgorithmSpec::SvdPp,
        AlgorithmSpec::Nmf,
        AlgorithmSpec::SlopeOne,
        AlgorithmSpec::CoClustering,
    ];

    /// Display name, as used in reports.
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmSpec::NormalPredictor => "NormalPredictor",
            AlgorithmSpec::BaselineOnly => "BaselineOnly",
            AlgorithmSpec::KnnBasic => "KNNBasic",
            AlgorithmSpec::KnnWithMeans => "KNNWithMeans",
            AlgorithmSpec::KnnWithZScore => "KNNWithZScore",
            AlgorithmSpec::KnnBaseline => "KNNBaseline",
            AlgorithmSpec::Svd => "SVD",
            AlgorithmSpec::SvdPp => "SVDpp",
            AlgorithmSpec::Nmf => "NMF",
            AlgorithmSpec::SlopeOne => "SlopeOne",
            AlgorithmSpec::CoClustering => "CoClustering",
        }
    }

    /// Command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            AlgorithmSpec::NormalPredictor => "normal-predictor",
            AlgorithmSpec::BaselineOnly => "baseline-only",
            AlgorithmSpec::KnnBasic => "knn-basic",
            AlgorithmSpec::KnnWithMeans => "knn-with-means",
            AlgorithmSpec::KnnWithZScore => "knn-with-zscore",
            AlgorithmSpec::KnnBaseline => "knn-baseline",
            AlgorithmSpec::Svd => "svd",
            AlgorithmSpec::SvdPp => "svdpp",
            AlgorithmSpec::Nmf => "nmf",
            AlgorithmSpec::SlopeOne => "slope-one",
            AlgorithmSpec::CoClustering => "co-clustering",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL
            .iter()
            .map(|a| a.cli_name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    /// Accepts the display name or the command-line spelling, ignoring case,
    /// `-` and `_`.
    fn from_str(s: &str) -> Result<Self> {
        let key = |x: &str| {
            x.chars()
                .filter(|c| *c != '-' && *c != '_')
                .collect::<String>()
                .to_ascii_lowercase()
        };
        let wanted = key(s);
        Self::ALL
            .into_iter()
            .find(|a| key(a.name()) == wanted || key(a.cli_name()) == wanted)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

/// Training ratings indexed by user and by item.
///
/// Ids are the inner ids of the full table, so an entity with no training
/// ratings is simply "unknown" to the fitted model.
#[derive(Debug, Clone)]
pub struct Trainset {
    pub n_users: usize,
    pub n_items: usize,
    /// `(user, item, rating)` in table order.
    pub ratings: Vec<(usize, usize, f64)>,
    /// Per user: `(item, rating)`.
    pub ur: Vec<Vec<(usize, f64)>>,
    /// Per item: `(user, rating)`.
    pub ir: Vec<Vec<(usize, f64)>>,
    pub global_mean: f64,
    pub scale: RatingScale,
}

impl Trainset {
    /// Training set made of the listed rating indices of `table`.
    pub fn from_indices(table: &RatingsTable, indices: &[usize]) -> Self {
        let all = table.ratings();
        let ratings = indices
            .iter()
            .map(|&k| (all[k].user, all[k].item, all[k].value))
            .collect();
        Self::new(table.n_users(), table.n_items(), ratings, table.scale())
    }

    pub fn from_table(table: &RatingsTable) -> Self {
        let indices: Vec<usize> = (0..table.n_ratings()).collect();
        Self::from_indices(table, &indices)
    }

    pub fn new(
        n_users: usize,
        n_items: usize,
        ratings: Vec<(usize, usize, f64)>,
        scale: RatingScale,
    ) -> Self {
        let mut ur = vec![Vec::new(); n_users];
        let mut ir = vec![Vec::new(); n_items];
        let mut sum = 0.0;
        for &(u, i, r) in &ratings {
            ur[u].push((i, r));
            ir[i].push((u, r));
            sum += r;
        }
        let global_mean = if ratings.is_empty() {
            (scale.min + scale.max) / 2.0
        } else {
            sum / ratings.len() as f64
        };
        Self {
            n_users,
            n_items,
            ratings,
            ur,
            ir,
            global_mean,
            scale,
        }
    }

    pub fn knows_user(&self, u: usize) -> bool {
        self.ur.get(u).is_some_and(|r| !r.is_empty())
    }

    pub fn knows_item(&self, i: usize) -> bool {
        self.ir.get(i).is_some_and(|r| !r.is_empty())
    }

    /// Mean rating of every user (global mean for users without ratings).
    pub fn user_means(&self) -> Vec<f64> {
        means(&self.ur, self.global_mean)
    }

    pub fn item_means(&self) -> Vec<f64> {
        means(&self.ir, self.global_mean)
    }
}

fn means(lists: &[Vec<(usize, f64)>], fallback: f64) -> Vec<f64> {
    lists
        .iter()
        .map(|l| {
            if l.is_empty() {
                fallback
            } else {
                l.iter().map(|(_, r)| r).sum::<f64>() / l.len() as f64
            }
        })
        .collect()
}

/// Raw output of an estimator, before clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub impossible: bool,
}

impl Estimate {
    pub fn ok(value: f64) -> Self {
        Self {
            value,
            impossible: false,
        }
    }

    pub fn impossible(fallback: f64) -> Self {
        Self {
            value: fallback,
            impossible: true,
        }
    }
}

/// Learned state of one algorithm.
///
/// `user`/`item` may be out of range for ids the training data never saw.
pub trait Estimator: Send + Sync {
    fn estimate(&self, user: usize, item: usize) -> Estimate;
}

/// A score returned by [`FittedModel::score`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub value: f64,
    pub was_impossible: bool,
}

/// A trained predictor.
pub struct FittedModel {
    algorithm: AlgorithmSpec,
    global_mean: f64,
    scale: RatingScale,
    estimator: Box<dyn Estimator>,
}

impl fmt::Debug for FittedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FittedModel")
            .field("algorithm", &self.algorithm)
            .field("global_mean", &self.global_mean)
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl FittedModel {
    pub fn new(algorithm: AlgorithmSpec, train: &Trainset, estimator: Box<dyn Estimator>) -> Self {
        Self {
            algorithm,
            global_mean: train.global_mean,
            scale: train.scale,
            estimator,
        }
    }

    pub fn algorithm(&self) -> AlgorithmSpec {
        self.algorithm
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// Scores a pair of inner ids; `None` stands for an id the table has
    /// never seen. The result is always finite and clipped to the scale.
    pub fn score(&self, user: Option<usize>, item: Option<usize>) -> Prediction {
        let est = self
            .estimator
            .estimate(user.unwrap_or(usize::MAX), item.unwrap_or(usize::MAX));
        let (value, was_impossible) = if est.value.is_finite() {
            (est.value, est.impossible)
        } else {
            (self.global_mean, true)
        };
        Prediction {
            value: self.scale.clip(value),
            was_impossible,
        }
    }

    /// Scores raw ids through the table's id maps.
    pub fn score_raw(&self, table: &RatingsTable, user: &str, item: &str) -> Prediction {
        self.score(table.user_inner(user), table.item_inner(item))
    }
}

/// Fits `algo` with hyperparameters from `params` (missing entries take the
/// algorithm's defaults).
pub fn fit(
    algo: AlgorithmSpec,
    params: &ParamAssignment,
    train: &Trainset,
    seed: u64,
) -> Result<FittedModel> {
    use AlgorithmSpec::*;
    let estimator: Box<dyn Estimator> = match algo {
        NormalPredictor => Box::new(normal::NormalPredictor::fit(train, seed)),
        BaselineOnly => {
            let method = BaselineMethod::from_params(params)?;
            Box::new(baseline::BaselineOnly {
                baselines: fit_baselines(train, &method),
            })
        }
        KnnBasic | KnnWithMeans | KnnWithZScore | KnnBaseline => {
            let variant = match algo {
                KnnBasic => knn::KnnVariant::Basic,
                KnnWithMeans => knn::KnnVariant::WithMeans,
                KnnWithZScore => knn::KnnVariant::WithZScore,
                _ => knn::KnnVariant::Baseline,
            };
            let knn_params = knn::KnnParams::from_params(params)?;
            Box::new(knn::fit_knn(train, variant, &knn_params)?)
        }
        Svd | SvdPp => {
            let variant = if algo == Svd {
                svd::SvdVariant::Svd
            } else {
                svd::SvdVariant::SvdPp
            };
            let p = svd::SvdParams::from_params(variant, params)?;
            Box::new(svd::fit_svd(train, variant, &p, seed)?)
        }
        Nmf => Box::new(nmf::fit_nmf(train, &nmf::NmfParams::from_params(params)?, seed)?),
        SlopeOne => Box::new(slope_one::fit_slope_one(train)?),
        CoClustering => Box::new(coclustering::fit_coclustering(
            train,
            &coclustering::CoClusteringParams::from_params(params)?,
            seed,
        )?),
    };
    Ok(FittedModel::new(algo, train, estimator))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse_back() {
        for algo in AlgorithmSpec::ALL {
            assert_eq!(algo.name().parse::<AlgorithmSpec>().unwrap(), algo);
            assert_eq!(algo.cli_name().parse::<AlgorithmSpec>().unwrap(), algo);
        }
        assert_eq!("KNN_Baseline".parse::<AlgorithmSpec>().unwrap(), AlgorithmSpec::KnnBaseline);
        assert!("als".parse::<AlgorithmSpec>().is_err());
    }
}
