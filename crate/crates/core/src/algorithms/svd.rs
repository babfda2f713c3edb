//! Biased matrix factorization trained by SGD, with optional implicit
//! feedback from the set of items each user rated.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Estimate, Estimator, Trainset};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::space::ParamAssignment;

const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvdVariant {
    Svd,
    /// Adds `|N(u)|^-1/2 * sum_j y_j` to the user factor.
    SvdPp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdParams {
    pub n_factors: usize,
    pub n_epochs: usize,
    pub lr: f64,
    pub reg: f64,
}

impl SvdParams {
    pub fn defaults(variant: SvdVariant) -> Self {
        match variant {
            SvdVariant::Svd => Self {
                n_factors: 100,
                n_epochs: 20,
                lr: 0.005,
                reg: 0.02,
            },
            SvdVariant::SvdPp => Self {
                n_factors: 20,
                n_epochs: 20,
                lr: 0.007,
                reg: 0.02,
            },
        }
    }

    pub fn from_params(variant: SvdVariant, params: &ParamAssignment) -> Result<Self> {
        let d = Self::defaults(variant);
        let p = Self {
            n_factors: params.count("n_factors")?.unwrap_or(d.n_factors),
            n_epochs: params.count("n_epochs")?.unwrap_or(d.n_epochs),
            lr: params.real("lr")?.unwrap_or(d.lr),
            reg: params.real("reg")?.unwrap_or(d.reg),
        };
        if p.n_factors == 0 {
            return Err(Error::param("n_factors", "must be at least 1"));
        }
        Ok(p)
    }
}

/// Row-major `rows x f` matrix.
#[derive(Debug, Clone)]
struct Factors {
    f: usize,
    data: Vec<f64>,
}

impl Factors {
    fn random(rows: usize, f: usize, rng: &mut Rng) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        Self {
            f,
            data: (0..rows * f).map(|_| normal.sample(rng)).collect(),
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.f..(r + 1) * self.f]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.f..(r + 1) * self.f]
    }

    fn sq_norm(&self, r: usize) -> f64 {
        self.row(r).iter().map(|x| x * x).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Epoch-by-epoch trainer; [`fit_svd`] runs it to completion.
pub struct SvdTrainer<'a> {
    train: &'a Trainset,
    variant: SvdVariant,
    params: SvdParams,
    rng: Rng,
    bu: Vec<f64>,
    bi: Vec<f64>,
    pu: Factors,
    qi: Factors,
    yj: Option<Factors>,
    order: Vec<usize>,
    epoch: usize,
}

impl<'a> SvdTrainer<'a> {
    pub fn new(train: &'a Trainset, variant: SvdVariant, params: &SvdParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed::derive(seed, "svd", 0));
        let f = params.n_factors;
        let pu = Factors::random(train.n_users, f, &mut rng);
        let qi = Factors::random(train.n_items, f, &mut rng);
        let yj = (variant == SvdVariant::SvdPp).then(|| Factors::random(train.n_items, f, &mut rng));
        Self {
            train,
            variant,
            params: params.clone(),
            rng,
            bu: vec![0.0; train.n_users],
            bi: vec![0.0; train.n_items],
            pu,
            qi,
            yj,
            order: (0..train.ratings.len()).collect(),
            epoch: 0,
        }
    }

    /// `|N(u)|^-1/2 * sum_{j in N(u)} y_j` into `out`.
    fn implicit(&self, u: usize, out: &mut [f64]) {
        out.fill(0.0);
        let (Some(yj), rated) = (&self.yj, &self.train.ur[u]) else {
            return;
        };
        if rated.is_empty() {
            return;
        }
        for &(j, _) in rated {
            for (o, y) in out.iter_mut().zip(yj.row(j)) {
                *o += y;
            }
        }
        let norm = (rated.len() as f64).sqrt().recip();
        out.iter_mut().for_each(|o| *o *= norm);
    }

    /// One shuffled SGD pass. Returns the regularized training loss after the
    /// pass, or [`Error::Diverged`] if it is not finite.
    pub fn run_epoch(&mut self) -> Result<f64> {
        self.epoch += 1;
        self.order.shuffle(&mut self.rng);
        let f = self.params.n_factors;
        let (lr, reg) = (self.params.lr, self.params.reg);
        let mu = self.train.global_mean;
        let mut implicit = vec![0.0; f];
        let mut user_vec = vec![0.0; f];
        let mut q_old = vec![0.0; f];
        for idx in 0..self.order.len() {
            let (u, i, r) = self.train.ratings[self.order[idx]];
            self.implicit(u, &mut implicit);
            for ((uv, p), y) in user_vec.iter_mut().zip(self.pu.row(u)).zip(&implicit) {
                *uv = p + y;
            }
            let err = r - (mu + self.bu[u] + self.bi[i] + dot(self.qi.row(i), &user_vec));
            self.bu[u] += lr * (err - reg * self.bu[u]);
            self.bi[i] += lr * (err - reg * self.bi[i]);

            q_old.copy_from_slice(self.qi.row(i));
            let p_row = self.pu.row_mut(u);
            for (p, q) in p_row.iter_mut().zip(&q_old) {
                let p0 = *p;
                *p += lr * (err * q - reg * p0);
            }
            // gradient of q_i is the full user vector p_u (+ implicit term)
            for ((q, uv), q0) in self.qi.row_mut(i).iter_mut().zip(&user_vec).zip(&q_old) {
                *q += lr * (err * uv - reg * q0);
            }
            if let Some(yj) = self.yj.as_mut() {
                let rated = &self.train.ur[u];
                let scale = err / (rated.len() as f64).sqrt();
                for &(j, _) in rated {
                    for (y, q) in yj.row_mut(j).iter_mut().zip(&q_old) {
                        *y += lr * (scale * q - reg * *y);
                    }
                }
            }
        }
        let loss = self.loss();
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch: self.epoch });
        }
        Ok(loss)
    }

    /// Sum over training ratings of squared error plus
    /// `reg * (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2)`.
    pub fn loss(&self) -> f64 {
        let f = self.params.n_factors;
        let mu = self.train.global_mean;
        let reg = self.params.reg;
        let mut implicit = vec![0.0; f];
        let mut user_vec = vec![0.0; f];
        let mut total = 0.0;
        for (u, rated) in self.train.ur.iter().enumerate() {
            if rated.is_empty() {
                continue;
            }
            self.implicit(u, &mut implicit);
            for ((uv, p), y) in user_vec.iter_mut().zip(self.pu.row(u)).zip(&implicit) {
                *uv = p + y;
            }
            let pu_sq = self.pu.sq_norm(u);
            for &(i, r) in rated {
                let err = r - (mu + self.bu[u] + self.bi[i] + dot(self.qi.row(i), &user_vec));
                total += err * err
                    + reg * (self.bu[u].powi(2) + self.bi[i].powi(2) + pu_sq + self.qi.sq_norm(i));
            }
        }
        total
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    pub fn into_model(self) -> SvdModel {
        let f = self.params.n_factors;
        let mut user_vecs = self.pu.clone();
        if self.yj.is_some() {
            let mut implicit = vec![0.0; f];
            for u in 0..self.train.n_users {
                self.implicit(u, &mut implicit);
                for (p, y) in user_vecs.row_mut(u).iter_mut().zip(&implicit) {
                    *p += y;
                }
            }
        }
        SvdModel {
            mu: self.train.global_mean,
            bu: self.bu,
            bi: self.bi,
            user_vecs,
            qi: self.qi,
            known_user: self.train.ur.iter().map(|l| !l.is_empty()).collect(),
            known_item: self.train.ir.iter().map(|l| !l.is_empty()).collect(),
            variant: self.variant,
        }
    }
}

pub struct SvdModel {
    mu: f64,
    bu: Vec<f64>,
    bi: Vec<f64>,
    /// `p_u`, plus the implicit term for SVD++.
    user_vecs: Factors,
    qi: Factors,
    known_user: Vec<bool>,
    known_item: Vec<bool>,
    pub variant: SvdVariant,
}

impl Estimator for SvdModel {
    fn estimate(&self, user: usize, item: usize) -> Estimate {
        let ku = self.known_user.get(user).copied().unwrap_or(false);
        let ki = self.known_item.get(item).copied().unwrap_or(false);
        let mut est = self.mu;
        if ku {
            est += self.bu[user];
        }
        if ki {
            est += self.bi[item];
        }
        if ku && ki {
            est += dot(self.user_vecs.row(user), self.qi.row(item));
        }
        Estimate::ok(est)
    }
}

pub fn fit_svd(train: &Trainset, variant: SvdVariant, params: &SvdParams, seed: u64) -> Result<SvdModel> {
    let mut trainer = SvdTrainer::new(train, variant, params, seed);
    for _ in 0..params.n_epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.into_model())
}
