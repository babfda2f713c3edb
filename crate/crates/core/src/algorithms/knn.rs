//! Neighborhood predictors.
//!
//! With `user_based` the neighbors of a user are other users who rated the
//! target item; otherwise roles are transposed and the neighbors of an item are
//! other items rated by the target user. Only the `k` most similar neighbors
//! with positive similarity take part.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{
    compute_similarity, fit_baselines, BaselineMethod, Baselines, Estimate, Estimator, SimKind,
    SimOptions, SimilarityMatrix, Trainset,
};
use crate::error::{Error, Result};
use crate::space::ParamAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnnVariant {
    Basic,
    WithMeans,
    WithZScore,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub min_k: usize,
    pub sim: SimOptions,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            k: 40,
            min_k: 1,
            sim: SimOptions::default(),
        }
    }
}

impl KnnParams {
    pub fn from_params(params: &ParamAssignment) -> Result<Self> {
        let d = Self::default();
        let kind = match params.label("sim")? {
            None => d.sim.kind,
            Some(label) => SimKind::from_label(label)
                .ok_or_else(|| Error::param("sim", format!("unknown similarity `{label}`")))?,
        };
        let k = params.count("k")?.unwrap_or(d.k);
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        Ok(Self {
            k,
            min_k: params.count("min_k")?.unwrap_or(d.min_k),
            sim: SimOptions {
                kind,
                user_based: params.flag("user_based")?.unwrap_or(d.sim.user_based),
                min_support: params.count("min_support")?.unwrap_or(d.sim.min_support),
                shrinkage: params.real("shrinkage")?.unwrap_or(d.sim.shrinkage),
            },
        })
    }
}

pub struct Knn {
    variant: KnnVariant,
    k: usize,
    min_k: usize,
    user_based: bool,
    global_mean: f64,
    sim: SimilarityMatrix,
    /// For each pivot entity y: the `(x, rating)` pairs that rated it.
    raters: Vec<Vec<(usize, f64)>>,
    known_x: Vec<bool>,
    means: Vec<f64>,
    sigmas: Vec<f64>,
    baselines: Option<Baselines>,
}

pub fn fit_knn(train: &Trainset, variant: KnnVariant, params: &KnnParams) -> Result<Knn> {
    let baselines = (variant == KnnVariant::Baseline || params.sim.kind == SimKind::PearsonBaseline)
        .then(|| fit_baselines(train, &BaselineMethod::default()));
    let sim = compute_similarity(train, &params.sim, baselines.as_ref())?;
    let (xs, ys) = if params.sim.user_based {
        (&train.ur, &train.ir)
    } else {
        (&train.ir, &train.ur)
    };
    let means = if params.sim.user_based {
        train.user_means()
    } else {
        train.item_means()
    };
    let sigmas = xs
        .iter()
        .zip(&means)
        .map(|(list, &m)| {
            if list.is_empty() {
                0.0
            } else {
                (list.iter().map(|(_, r)| (r - m).powi(2)).sum::<f64>() / list.len() as f64).sqrt()
            }
        })
        .collect();
    Ok(Knn {
        variant,
        k: params.k,
        min_k: params.min_k,
        user_based: params.sim.user_based,
        global_mean: train.global_mean,
        sim,
        raters: ys.clone(),
        known_x: xs.iter().map(|l| !l.is_empty()).collect(),
        means,
        sigmas,
        baselines,
    })
}

impl Knn {
    pub fn similarity(&self) -> &SimilarityMatrix {
        &self.sim
    }

    /// Baseline of `(x, y)` in the model's orientation.
    fn baseline(&self, x: usize, y: usize) -> f64 {
        let b = self.baselines.as_ref().expect("fitted for the baseline variant");
        if self.user_based {
            b.estimate(x, y)
        } else {
            b.estimate(y, x)
        }
    }

    fn fallback(&self, x: usize, y: usize) -> f64 {
        let known_x = self.known_x.get(x).copied().unwrap_or(false);
        match self.variant {
            KnnVariant::Basic => self.global_mean,
            KnnVariant::WithMeans | KnnVariant::WithZScore if known_x => self.means[x],
            KnnVariant::WithMeans | KnnVariant::WithZScore => self.global_mean,
            KnnVariant::Baseline => self.baseline(x, y),
        }
    }

    /// The at most `k` positive-similarity neighbors of `x` that rated `y`,
    /// most similar first (ties by lower id).
    pub fn neighbors(&self, x: usize, y: usize) -> Vec<(usize, f64, f64)> {
        let row = self.sim.row(x);
        let mut nbrs: Vec<(usize, f64, f64)> = self.raters[y]
            .iter()
            .map(|&(x2, r)| (x2, row[x2], r))
            .filter(|&(_, s, _)| s > 0.0)
            .collect();
        let order = |a: &(usize, f64, f64), b: &(usize, f64, f64)| {
            b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
        };
        if nbrs.len() > self.k {
            nbrs.select_nth_unstable_by(self.k - 1, order);
            nbrs.truncate(self.k);
        }
        nbrs.sort_by(order);
        nbrs
    }
}

impl Estimator for Knn {
    fn estimate(&self, user: usize, item: usize) -> Estimate {
        let (x, y) = if self.user_based {
            (user, item)
        } else {
            (item, user)
        };
        let known_x = self.known_x.get(x).copied().unwrap_or(false);
        let known_y = self.raters.get(y).is_some_and(|l| !l.is_empty());
        if !known_x || !known_y {
            let fallback = match self.variant {
                KnnVariant::Baseline => self.baseline(x, y),
                _ if known_x => self.fallback(x, y),
                _ => self.global_mean,
            };
            return Estimate::impossible(fallback);
        }

        let nbrs = self.neighbors(x, y);
        if nbrs.len() < self.min_k || nbrs.is_empty() {
            return Estimate::impossible(self.fallback(x, y));
        }
        let sum_sim: f64 = nbrs.iter().map(|n| n.1).sum();
        let value = match self.variant {
            KnnVariant::Basic => nbrs.iter().map(|&(_, s, r)| s * r).sum::<f64>() / sum_sim,
            KnnVariant::WithMeans => {
                self.means[x]
                    + nbrs.iter().map(|&(x2, s, r)| s * (r - self.means[x2])).sum::<f64>() / sum_sim
            }
            KnnVariant::WithZScore => {
                let dev: f64 = nbrs
                    .iter()
                    .map(|&(x2, s, r)| {
                        let sigma = if self.sigmas[x2] > 0.0 { self.sigmas[x2] } else { 1.0 };
                        s * (r - self.means[x2]) / sigma
                    })
                    .sum();
                self.means[x] + self.sigmas[x] * dev / sum_sim
            }
            KnnVariant::Baseline => {
                self.baseline(x, y)
                    + nbrs
                        .iter()
                        .map(|&(x2, s, r)| s * (r - self.baseline(x2, y)))
                        .sum::<f64>()
                        / sum_sim
            }
        };
        Estimate::ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingScale;
    use approx::assert_abs_diff_eq;

    fn trainset(ratings: Vec<(usize, usize, f64)>, n_users: usize, n_items: usize) -> Trainset {
        Trainset::new(n_users, n_items, ratings, RatingScale::new(1.0, 5.0).unwrap())
    }

    fn params(kind: SimKind, k: usize, min_k: usize) -> KnnParams {
        KnnParams {
            k,
            min_k,
            sim: SimOptions {
                kind,
                ..SimOptions::default()
            },
        }
    }

    #[test]
    fn single_perfect_neighbor() {
        // user 1 agrees with user 0 exactly on item 0 and rated item 1 as 4
        let t = trainset(vec![(0, 0, 3.0), (1, 0, 3.0), (1, 1, 4.0)], 2, 2);
        let knn = fit_knn(&t, KnnVariant::Basic, &params(SimKind::Msd, 40, 1)).unwrap();
        let est = knn.estimate(0, 1);
        assert_eq!(est, Estimate::ok(4.0));
    }

    #[test]
    fn no_neighbor_falls_back() {
        let t = trainset(vec![(0, 0, 3.0), (1, 1, 5.0), (1, 2, 5.0)], 2, 3);
        for (variant, fallback) in [
            (KnnVariant::Basic, t.global_mean),
            (KnnVariant::WithMeans, 3.0),
            (KnnVariant::WithZScore, 3.0),
        ] {
            let knn = fit_knn(&t, variant, &params(SimKind::Msd, 40, 1)).unwrap();
            assert_eq!(knn.estimate(0, 1), Estimate::impossible(fallback), "{variant:?}");
        }
        let knn = fit_knn(&t, KnnVariant::Baseline, &params(SimKind::Msd, 40, 1)).unwrap();
        let est = knn.estimate(0, 1);
        assert!(est.impossible);
        let b = fit_baselines(&t, &BaselineMethod::default());
        assert_abs_diff_eq!(est.value, b.estimate(0, 1), epsilon = 1e-12);
    }

    #[test]
    fn with_means_three_users() {
        // A and B rate items 0, 1 identically (cosine 1); C shares nothing with A.
        // A: 4, 2 -> mean 3.   B: 4, 2, item 2 = 5 -> mean 11/3.
        // C: item 3 = 1, item 2 = 1 -> mean 1.
        // score(A, 2) = 3 + 1 * (5 - 11/3) / 1
        let t = trainset(
            vec![
                (0, 0, 4.0),
                (0, 1, 2.0),
                (1, 0, 4.0),
                (1, 1, 2.0),
                (1, 2, 5.0),
                (2, 3, 1.0),
                (2, 2, 1.0),
            ],
            3,
            4,
        );
        let knn = fit_knn(&t, KnnVariant::WithMeans, &params(SimKind::Cosine, 40, 1)).unwrap();
        assert_abs_diff_eq!(knn.similarity().get(0, 1), 1.0, epsilon = 1e-12);
        assert_eq!(knn.similarity().get(0, 2), 0.0);
        let est = knn.estimate(0, 2);
        assert!(!est.impossible);
        assert_abs_diff_eq!(est.value, 3.0 + (5.0 - 11.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn min_k_forces_fallback() {
        let t = trainset(vec![(0, 0, 3.0), (1, 0, 3.0), (1, 1, 4.0)], 2, 2);
        let knn = fit_knn(&t, KnnVariant::Basic, &params(SimKind::Msd, 40, 2)).unwrap();
        assert!(knn.estimate(0, 1).impossible);
    }

    #[test]
    fn unknown_ids_use_global_mean() {
        let t = trainset(vec![(0, 0, 3.0), (1, 0, 5.0), (1, 1, 4.0)], 2, 2);
        let knn = fit_knn(&t, KnnVariant::WithMeans, &params(SimKind::Msd, 40, 1)).unwrap();
        assert_eq!(knn.estimate(usize::MAX, usize::MAX), Estimate::impossible(t.global_mean));
    }

    #[test]
    fn top_k_keeps_most_similar() {
        // target user 0; users 1..=3 rated item 3 with decreasing agreement on items 0..3
        let mut r = vec![(0, 0, 5.0), (0, 1, 5.0), (0, 2, 5.0)];
        for (u, rating, target) in [(1, 5.0, 1.0), (2, 4.0, 3.0), (3, 2.0, 5.0)] {
            for i in 0..3 {
                r.push((u, i, rating));
            }
            r.push((u, 3, target));
        }
        let t = trainset(r, 4, 4);
        let knn = fit_knn(&t, KnnVariant::Basic, &params(SimKind::Msd, 1, 1)).unwrap();
        assert_eq!(knn.estimate(0, 3), Estimate::ok(1.0));
        let nbrs = knn.neighbors(0, 3);
        assert_eq!(nbrs.len(), 1);
        assert_eq!(nbrs[0].0, 1);
    }

    #[test]
    fn item_based_transposes_roles() {
        let ratings = vec![(0, 0, 3.0), (1, 0, 3.0), (1, 1, 4.0), (2, 1, 2.0), (2, 0, 1.0)];
        let t = trainset(ratings.clone(), 3, 2);
        let tt = trainset(ratings.iter().map(|&(u, i, r)| (i, u, r)).collect(), 2, 3);
        let mut p = params(SimKind::Pearson, 40, 1);
        let user_based = fit_knn(&tt, KnnVariant::WithMeans, &p).unwrap();
        p.sim.user_based = false;
        let item_based = fit_knn(&t, KnnVariant::WithMeans, &p).unwrap();
        for u in 0..3 {
            for i in 0..2 {
                assert_eq!(item_based.estimate(u, i), user_based.estimate(i, u));
            }
        }
    }

    #[test]
    fn params_parse_nested_shrinkage() {
        let p = ParamAssignment::new()
            .with("k", 25)
            .with("sim", "pearson_baseline")
            .with("shrinkage", 50.0)
            .with("user_based", "false");
        let p = KnnParams::from_params(&p).unwrap();
        assert_eq!(p.k, 25);
        assert_eq!(p.sim.kind, SimKind::PearsonBaseline);
        assert_eq!(p.sim.shrinkage, 50.0);
        assert!(!p.sim.user_based);
        assert!(KnnParams::from_params(&ParamAssignment::new().with("sim", "jaccard")).is_err());
    }
}
