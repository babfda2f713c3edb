//! Global mean plus per-user and per-item biases.

use serde::{Deserialize, Serialize};

use super::{Estimate, Estimator, Trainset};
use crate::error::{Error, Result};
use crate::space::ParamAssignment;

/// How the biases are estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum BaselineMethod {
    Als { epochs: usize, reg_u: f64, reg_i: f64 },
    Sgd { epochs: usize, lr: f64, reg: f64 },
}

impl Default for BaselineMethod {
    fn default() -> Self {
        BaselineMethod::Als {
            epochs: 10,
            reg_u: 15.0,
            reg_i: 10.0,
        }
    }
}

impl BaselineMethod {
    pub fn default_sgd() -> Self {
        BaselineMethod::Sgd {
            epochs: 20,
            lr: 0.005,
            reg: 0.02,
        }
    }

    pub fn from_params(params: &ParamAssignment) -> Result<Self> {
        match params.label("method")?.unwrap_or("als") {
            "als" => {
                let BaselineMethod::Als { epochs, reg_u, reg_i } = Self::default() else {
                    unreachable!()
                };
                Ok(BaselineMethod::Als {
                    epochs: params.count("epochs")?.unwrap_or(epochs),
                    reg_u: params.real("reg_u")?.unwrap_or(reg_u),
                    reg_i: params.real("reg_i")?.unwrap_or(reg_i),
                })
            }
            "sgd" => {
                let BaselineMethod::Sgd { epochs, lr, reg } = Self::default_sgd() else {
                    unreachable!()
                };
                Ok(BaselineMethod::Sgd {
                    epochs: params.count("epochs")?.unwrap_or(epochs),
                    lr: params.real("lr")?.unwrap_or(lr),
                    reg: params.real("reg")?.unwrap_or(reg),
                })
            }
            other => Err(Error::param("method", format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Baselines {
    pub mu: f64,
    pub bu: Vec<f64>,
    pub bi: Vec<f64>,
}

impl Baselines {
    pub fn user_bias(&self, u: usize) -> f64 {
        self.bu.get(u).copied().unwrap_or(0.0)
    }

    pub fn item_bias(&self, i: usize) -> f64 {
        self.bi.get(i).copied().unwrap_or(0.0)
    }

    /// `mu + b_u + b_i`, with zero bias for unseen ids.
    pub fn estimate(&self, u: usize, i: usize) -> f64 {
        self.mu + self.user_bias(u) + self.item_bias(i)
    }
}

/// Fits biases from zero initialization.
pub fn fit_baselines(train: &Trainset, method: &BaselineMethod) -> Baselines {
    let mu = train.global_mean;
    let mut bu = vec![0.0; train.n_users];
    let mut bi = vec![0.0; train.n_items];
    match *method {
        BaselineMethod::Als { epochs, reg_u, reg_i } => {
            for _ in 0..epochs {
                for (i, ratings) in train.ir.iter().enumerate() {
                    let dev: f64 = ratings.iter().map(|&(u, r)| r - mu - bu[u]).sum();
                    let denom = reg_i + ratings.len() as f64;
                    bi[i] = if denom > 0.0 { dev / denom } else { 0.0 };
                }
                for (u, ratings) in train.ur.iter().enumerate() {
                    let dev: f64 = ratings.iter().map(|&(i, r)| r - mu - bi[i]).sum();
                    let denom = reg_u + ratings.len() as f64;
                    bu[u] = if denom > 0.0 { dev / denom } else { 0.0 };
                }
            }
        }
        BaselineMethod::Sgd { epochs, lr, reg } => {
            for _ in 0..epochs {
                for &(u, i, r) in &train.ratings {
                    let err = r - (mu + bu[u] + bi[i]);
                    bu[u] += lr * (err - reg * bu[u]);
                    bi[i] += lr * (err - reg * bi[i]);
                }
            }
        }
    }
    Baselines { mu, bu, bi }
}

/// The baseline-only predictor.
pub struct BaselineOnly {
    pub baselines: Baselines,
}

impl Estimator for BaselineOnly {
    fn estimate(&self, user: usize, item: usize) -> Estimate {
        Estimate::ok(self.baselines.estimate(user, item))
    }
}
