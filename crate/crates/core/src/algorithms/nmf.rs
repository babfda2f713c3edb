//! Unbiased non-negative matrix factorization with multiplicative updates.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Estimate, Estimator, Trainset};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::space::ParamAssignment;

/// Lower bound for update denominators.
pub const DENOM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfParams {
    pub n_factors: usize,
    pub n_epochs: usize,
    pub reg_pu: f64,
    pub reg_qi: f64,
}

impl Default for NmfParams {
    fn default() -> Self {
        Self {
            n_factors: 15,
            n_epochs: 50,
            reg_pu: 0.06,
            reg_qi: 0.06,
        }
    }
}

impl NmfParams {
    pub fn from_params(params: &ParamAssignment) -> Result<Self> {
        let d = Self::default();
        let p = Self {
            n_factors: params.count("n_factors")?.unwrap_or(d.n_factors),
            n_epochs: params.count("n_epochs")?.unwrap_or(d.n_epochs),
            reg_pu: params.real("reg_pu")?.unwrap_or(d.reg_pu),
            reg_qi: params.real("reg_qi")?.unwrap_or(d.reg_qi),
        };
        if p.n_factors == 0 {
            return Err(Error::param("n_factors", "must be at least 1"));
        }
        if p.reg_pu < 0.0 || p.reg_qi < 0.0 {
            return Err(Error::param("reg_pu", "regularization must be non-negative"));
        }
        Ok(p)
    }
}

pub struct NmfTrainer<'a> {
    train: &'a Trainset,
    params: NmfParams,
    pu: Vec<f64>,
    qi: Vec<f64>,
}

fn positive_uniform(rng: &mut Rng) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return x;
        }
    }
}

impl<'a> NmfTrainer<'a> {
    pub fn new(train: &'a Trainset, params: &NmfParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed::derive(seed, "nmf", 0));
        let f = params.n_factors;
        let pu = (0..train.n_users * f).map(|_| positive_uniform(&mut rng)).collect();
        let qi = (0..train.n_items * f).map(|_| positive_uniform(&mut rng)).collect();
        Self {
            train,
            params: params.clone(),
            pu,
            qi,
        }
    }

    fn est(&self, u: usize, i: usize) -> f64 {
        let f = self.params.n_factors;
        self.pu[u * f..(u + 1) * f]
            .iter()
            .zip(&self.qi[i * f..(i + 1) * f])
            .map(|(p, q)| p * q)
            .sum()
    }

    /// One round of user then item updates.
    pub fn run_epoch(&mut self) {
        let f = self.params.n_factors;
        let t = self.train;

        let mut num = vec![0.0; t.n_users * f];
        let mut denom = vec![0.0; t.n_users * f];
        for &(u, i, r) in &t.ratings {
            let est = self.est(u, i);
            for k in 0..f {
                num[u * f + k] += self.qi[i * f + k] * r;
                denom[u * f + k] += self.qi[i * f + k] * est;
            }
        }
        for (u, rated) in t.ur.iter().enumerate() {
            let n = rated.len() as f64;
            for k in 0..f {
                let at = u * f + k;
                let d = (denom[at] + n * self.params.reg_pu * self.pu[at]).max(DENOM_EPS);
                self.pu[at] *= num[at] / d;
            }
        }

        let mut num = vec![0.0; t.n_items * f];
        let mut denom = vec![0.0; t.n_items * f];
        for &(u, i, r) in &t.ratings {
            let est = self.est(u, i);
            for k in 0..f {
                num[i * f + k] += self.pu[u * f + k] * r;
                denom[i * f + k] += self.pu[u * f + k] * est;
            }
        }
        for (i, raters) in t.ir.iter().enumerate() {
            let n = raters.len() as f64;
            for k in 0..f {
                let at = i * f + k;
                let d = (denom[at] + n * self.params.reg_qi * self.qi[at]).max(DENOM_EPS);
                self.qi[at] *= num[at] / d;
            }
        }
    }

    pub fn user_factors(&self) -> &[f64] {
        &self.pu
    }

    pub fn item_factors(&self) -> &[f64] {
        &self.qi
    }

    pub fn train_rmse(&self) -> f64 {
        let t = self.train;
        let sse: f64 = t
            .ratings
            .iter()
            .map(|&(u, i, r)| (r - self.est(u, i)).powi(2))
            .sum();
        (sse / t.ratings.len().max(1) as f64).sqrt()
    }

    pub fn into_model(self) -> NmfModel {
        NmfModel {
            f: self.params.n_factors,
            global_mean: self.train.global_mean,
            known_user: self.train.ur.iter().map(|l| !l.is_empty()).collect(),
            known_item: self.train.ir.iter().map(|l| !l.is_empty()).collect(),
            pu: self.pu,
            qi: self.qi,
        }
    }
}

pub struct NmfModel {
    f: usize,
    global_mean: f64,
    known_user: Vec<bool>,
    known_item: Vec<bool>,
    pu: Vec<f64>,
    qi: Vec<f64>,
}

impl Estimator for NmfModel {
    fn estimate(&self, user: usize, item: usize) -> Estimate {
        let known = self.known_user.get(user).copied().unwrap_or(false)
            && self.known_item.get(item).copied().unwrap_or(false);
        if !known {
            return Estimate::impossible(self.global_mean);
        }
        let f = self.f;
        Estimate::ok(
            self.pu[user * f..(user + 1) * f]
                .iter()
                .zip(&self.qi[item * f..(item + 1) * f])
                .map(|(p, q)| p * q)
                .sum(),
        )
    }
}

pub fn fit_nmf(train: &Trainset, params: &NmfParams, seed: u64) -> Result<NmfModel> {
    let mut trainer = NmfTrainer::new(train, params, seed);
    for _ in 0..params.n_epochs {
        trainer.run_epoch();
    }
    Ok(trainer.into_model())
}
