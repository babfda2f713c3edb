//! Co-clustering: users and items are clustered jointly and a rating is
//! predicted as the user and item means plus an offset shared by the
//! (user cluster, item cluster) block.
//!
//! Training alternates least-squares refits of the block offsets with
//! reassignment of every user and then every item to its error-minimizing
//! cluster, so the training objective never increases.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Estimate, Estimator, Trainset};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::space::ParamAssignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoClusteringParams {
    pub n_cltr_u: usize,
    pub n_cltr_i: usize,
    pub n_epochs: usize,
}

impl Default for CoClusteringParams {
    fn default() -> Self {
        Self {
            n_cltr_u: 3,
            n_cltr_i: 3,
            n_epochs: 20,
        }
    }
}

impl CoClusteringParams {
    pub fn from_params(params: &ParamAssignment) -> Result<Self> {
        let d = Self::default();
        let p = Self {
            n_cltr_u: params.count("n_cltr_u")?.unwrap_or(d.n_cltr_u),
            n_cltr_i: params.count("n_cltr_i")?.unwrap_or(d.n_cltr_i),
            n_epochs: params.count("n_epochs")?.unwrap_or(d.n_epochs),
        };
        if p.n_cltr_u == 0 || p.n_cltr_i == 0 {
            return Err(Error::param("n_cltr_u", "cluster counts must be at least 1"));
        }
        Ok(p)
    }
}

pub struct CoClusteringTrainer<'a> {
    train: &'a Trainset,
    n_cu: usize,
    n_ci: usize,
    cltr_u: Vec<usize>,
    cltr_i: Vec<usize>,
    /// Block offsets, `n_cu x n_ci`.
    offsets: Vec<f64>,
    user_means: Vec<f64>,
    item_means: Vec<f64>,
}

impl<'a> CoClusteringTrainer<'a> {
    pub fn new(train: &'a Trainset, params: &CoClusteringParams, seed: u64) -> Self {
        let mut rng: Rng = seed::rng(seed::derive(seed, "co-clustering", 0));
        let cltr_u = (0..train.n_users).map(|_| rng.random_range(0..params.n_cltr_u)).collect();
        let cltr_i = (0..train.n_items).map(|_| rng.random_range(0..params.n_cltr_i)).collect();
        let mut trainer = Self {
            train,
            n_cu: params.n_cltr_u,
            n_ci: params.n_cltr_i,
            cltr_u,
            cltr_i,
            offsets: vec![0.0; params.n_cltr_u * params.n_cltr_i],
            user_means: train.user_means(),
            item_means: train.item_means(),
        };
        trainer.refit_offsets();
        trainer
    }

    fn residual(&self, u: usize, i: usize, r: f64) -> f64 {
        r - self.user_means[u] - self.item_means[i]
    }

    /// Least-squares block offsets: the mean residual of each block. Empty
    /// blocks take the overall mean residual.
    fn refit_offsets(&mut self) {
        let mut sum = vec![0.0; self.n_cu * self.n_ci];
        let mut count = vec![0usize; self.n_cu * self.n_ci];
        let mut total = 0.0;
        for &(u, i, r) in &self.train.ratings {
            let b = self.cltr_u[u] * self.n_ci + self.cltr_i[i];
            let res = self.residual(u, i, r);
            sum[b] += res;
            count[b] += 1;
            total += res;
        }
        let overall = total / self.train.ratings.len().max(1) as f64;
        for (b, o) in self.offsets.iter_mut().enumerate() {
            *o = if count[b] > 0 {
                sum[b] / count[b] as f64
            } else {
                overall
            };
        }
    }

    /// Squared training error of the current state.
    pub fn objective(&self) -> f64 {
        self.train
            .ratings
            .iter()
            .map(|&(u, i, r)| {
                let b = self.cltr_u[u] * self.n_ci + self.cltr_i[i];
                (self.residual(u, i, r) - self.offsets[b]).powi(2)
            })
            .sum()
    }

    /// Error of user `u` if it sat in user cluster `c`.
    fn user_error(&self, u: usize, c: usize) -> f64 {
        self.train.ur[u]
            .iter()
            .map(|&(i, r)| (self.residual(u, i, r) - self.offsets[c * self.n_ci + self.cltr_i[i]]).powi(2))
            .sum()
    }

    fn item_error(&self, i: usize, c: usize) -> f64 {
        self.train.ir[i]
            .iter()
            .map(|&(u, r)| (self.residual(u, i, r) - self.offsets[self.cltr_u[u] * self.n_ci + c]).powi(2))
            .sum()
    }

    pub fn run_epoch(&mut self) {
        let users: Vec<usize> = (0..self.train.n_users).filter(|&u| self.train.knows_user(u)).collect();
        let reassigned: Vec<usize> = users
            .iter()
            .map(|&u| best_cluster(self.cltr_u[u], self.n_cu, |c| self.user_error(u, c)))
            .collect();
        for (&u, c) in users.iter().zip(reassigned) {
            self.cltr_u[u] = c;
        }
        let errors: Vec<f64> = users.iter().map(|&u| self.user_error(u, self.cltr_u[u])).collect();
        reseed_empty(&mut self.cltr_u, &users, &errors, self.n_cu);
        self.refit_offsets();

        let items: Vec<usize> = (0..self.train.n_items).filter(|&i| self.train.knows_item(i)).collect();
        let reassigned: Vec<usize> = items
            .iter()
            .map(|&i| best_cluster(self.cltr_i[i], self.n_ci, |c| self.item_error(i, c)))
            .collect();
        for (&i, c) in items.iter().zip(reassigned) {
            self.cltr_i[i] = c;
        }
        let errors: Vec<f64> = items.iter().map(|&i| self.item_error(i, self.cltr_i[i])).collect();
        reseed_empty(&mut self.cltr_i, &items, &errors, self.n_ci);
        self.refit_offsets();
    }

    pub fn into_model(self) -> CoClustering {
        CoClustering {
            n_ci: self.n_ci,
            known_user: self.train.ur.iter().map(|l| !l.is_empty()).collect(),
            known_item: self.train.ir.iter().map(|l| !l.is_empty()).collect(),
            global_mean: self.train.global_mean,
            cltr_u: self.cltr_u,
            cltr_i: self.cltr_i,
            offsets: self.offsets,
            user_means: self.user_means,
            item_means: self.item_means,
        }
    }
}

/// Lowest-error cluster; the current one wins ties.
fn best_cluster(current: usize, n: usize, error: impl Fn(usize) -> f64) -> usize {
    let mut best = (current, error(current));
    for c in 0..n {
        let e = error(c);
        if e < best.1 {
            best = (c, e);
        }
    }
    best.0
}

/// Moves the worst-fitting entity of a cluster with at least two members into
/// each empty cluster.
fn reseed_empty(assign: &mut [usize], entities: &[usize], errors: &[f64], n_clusters: usize) {
    let mut sizes = vec![0usize; n_clusters];
    for &e in entities {
        sizes[assign[e]] += 1;
    }
    let mut moved = vec![false; entities.len()];
    for empty in 0..n_clusters {
        if sizes[empty] > 0 {
            continue;
        }
        let candidate = (0..entities.len())
            .filter(|&k| !moved[k] && sizes[assign[entities[k]]] >= 2)
            .max_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(b.cmp(&a)));
        let Some(k) = candidate else {
            break;
        };
        sizes[assign[entities[k]]] -= 1;
        assign[entities[k]] = empty;
        sizes[empty] = 1;
        moved[k] = true;
    }
}

pub struct CoClustering {
    n_ci: usize,
    known_user: Vec<bool>,
    known_item: Vec<bool>,
    global_mean: f64,
    cltr_u: Vec<usize>,
    cltr_i: Vec<usize>,
    offsets: Vec<f64>,
    user_means: Vec<f64>,
    item_means: Vec<f64>,
}

impl Estimator for CoClustering {
    fn estimate(&self, user: usize, item: usize) -> Estimate {
        let ku = self.known_user.get(user).copied().unwrap_or(false);
        let ki = self.known_item.get(item).copied().unwrap_or(false);
        match (ku, ki) {
            (true, true) => Estimate::ok(
                self.user_means[user]
                    + self.item_means[item]
                    + self.offsets[self.cltr_u[user] * self.n_ci + self.cltr_i[item]],
            ),
            (true, false) => Estimate::impossible(self.user_means[user]),
            (false, true) => Estimate::impossible(self.item_means[item]),
            (false, false) => Estimate::impossible(self.global_mean),
        }
    }
}

pub fn fit_coclustering(train: &Trainset, params: &CoClusteringParams, seed: u64) -> Result<CoClustering> {
    let mut trainer = CoClusteringTrainer::new(train, params, seed);
    for _ in 0..params.n_epochs {
        trainer.run_epoch();
    }
    Ok(trainer.into_model())
}
