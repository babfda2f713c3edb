//! Random predictor: scores are draws from a normal fitted to the training
//! ratings.

use std::sync::Mutex;

use rand_distr::{Distribution, Normal};

use super::{Estimate, Estimator, Trainset};
use crate::seed::{self, Rng};

#[derive(Debug)]
pub struct NormalPredictor {
    pub mu: f64,
    pub sigma: f64,
    // Sampling advances the generator, so concurrent scorers are serialized.
    rng: Mutex<Rng>,
}

impl NormalPredictor {
    /// Maximum-likelihood mean and (biased) standard deviation.
    pub fn fit(train: &Trainset, seed: u64) -> Self {
        let n = train.ratings.len().max(1) as f64;
        let mu = train.global_mean;
        let var = train
            .ratings
            .iter()
            .map(|&(_, _, r)| (r - mu).powi(2))
            .sum::<f64>()
            / n;
        Self {
            mu,
            sigma: var.sqrt(),
            rng: Mutex::new(seed::rng(seed::derive(seed, "normal-predictor", 0))),
        }
    }
}

impl Estimator for NormalPredictor {
    fn estimate(&self, _user: usize, _item: usize) -> Estimate {
        if self.sigma == 0.0 {
            return Estimate::ok(self.mu);
        }
        let normal = Normal::new(self.mu, self.sigma).expect("finite, positive sigma");
        let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        Estimate::ok(normal.sample(&mut *rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{fit, AlgorithmSpec};
    use crate::dataset::RatingScale;
    use crate::space::ParamAssignment;
    use statrs::distribution::{Continuous, ContinuousCDF, Normal as StatNormal};

    fn train(values: &[f64]) -> Trainset {
        let ratings = values.iter().enumerate().map(|(k, &r)| (k % 7, k % 5, r)).collect();
        Trainset::new(7, 5, ratings, RatingScale::new(1.0, 5.0).unwrap())
    }

    #[test]
    fn constant_data_scores_constant() {
        let t = train(&[4.0; 20]);
        let model = fit(AlgorithmSpec::NormalPredictor, &ParamAssignment::new(), &t, 1).unwrap();
        for u in 0..7 {
            assert_eq!(model.score(Some(u), Some(0)).value, 4.0);
        }
    }

    #[test]
    fn clipped_scores_match_clipped_normal_mean() {
        let values: Vec<f64> = (0..200).map(|k| [1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 4.0][k % 7]).collect();
        let t = train(&values);
        let np = NormalPredictor::fit(&t, 17);
        let model = fit(AlgorithmSpec::NormalPredictor, &ParamAssignment::new(), &t, 17).unwrap();
        let n = 10_000;
        let mean = (0..n).map(|_| model.score(Some(0), Some(0)).value).sum::<f64>() / n as f64;

        // E[clip(X, a, b)] for X ~ N(mu, sigma)
        let (a, b, mu, sigma) = (1.0, 5.0, np.mu, np.sigma);
        let z = StatNormal::new(0.0, 1.0).unwrap();
        let (al, be) = ((a - mu) / sigma, (b - mu) / sigma);
        let expected = a * z.cdf(al)
            + b * (1.0 - z.cdf(be))
            + mu * (z.cdf(be) - z.cdf(al))
            + sigma * (z.pdf(al) - z.pdf(be));
        assert!(
            (mean - expected).abs() < 3.0 * sigma / 100.0,
            "empirical {mean} vs clipped-normal {expected}"
        );
    }
}
