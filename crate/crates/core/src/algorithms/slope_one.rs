//! Slope One: average rating offsets between item pairs.

use super::{Estimate, Estimator, Trainset};
use crate::algorithms::similarity::MAX_DENSE_ENTRIES;
use crate::error::{Error, Result};

pub struct SlopeOne {
    n_items: usize,
    /// `dev[i * n + j]`: mean of `r_ui - r_uj` over users who rated both.
    dev: Vec<f64>,
    freq: Vec<u32>,
    ur: Vec<Vec<(usize, f64)>>,
    user_means: Vec<f64>,
    global_mean: f64,
}

impl SlopeOne {
    pub fn deviation(&self, i: usize, j: usize) -> Option<f64> {
        let at = i * self.n_items + j;
        (self.freq[at] > 0).then(|| self.dev[at])
    }
}

pub fn fit_slope_one(train: &Trainset) -> Result<SlopeOne> {
    let n = train.n_items;
    let entries = n.saturating_mul(n);
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge {
            what: "slope-one deviation table",
            entries,
            limit: MAX_DENSE_ENTRIES,
        });
    }
    let mut dev = vec![0.0; entries];
    let mut freq = vec![0u32; entries];
    for rated in &train.ur {
        for &(i, ri) in rated {
            for &(j, rj) in rated {
                dev[i * n + j] += ri - rj;
                freq[i * n + j] += 1;
            }
        }
    }
    for (d, &c) in dev.iter_mut().zip(&freq) {
        if c > 0 {
            *d /= f64::from(c);
        }
    }
    Ok(SlopeOne {
        n_items: n,
        dev,
        freq,
        ur: train.ur.clone(),
        user_means: train.user_means(),
        global_mean: train.global_mean,
    })
}

impl Estimator for SlopeOne {
    fn estimate(&self, user: usize, item: usize) -> Estimate {
        let Some(rated) = self.ur.get(user).filter(|r| !r.is_empty()) else {
            return Estimate::impossible(self.global_mean);
        };
        let mean = self.user_means[user];
        if item >= self.n_items {
            return Estimate::impossible(mean);
        }
        let (sum, count) = rated
            .iter()
            .filter_map(|&(j, _)| self.deviation(item, j))
            .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
        if count == 0 {
            Estimate::impossible(mean)
        } else {
            Estimate::ok(mean + sum / count as f64)
        }
    }
}
