//! Pairwise similarity between users (or items) over their co-rated entries.

use serde::{Deserialize, Serialize};

use super::{fit_baselines, BaselineMethod, Baselines, Trainset};
use crate::error::{Error, Result};

/// Dense matrices above this many entries are refused rather than allocated.
pub const MAX_DENSE_ENTRIES: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    Cosine,
    Msd,
    Pearson,
    PearsonBaseline,
}

impl SimKind {
    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "cosine" => Some(SimKind::Cosine),
            "msd" => Some(SimKind::Msd),
            "pearson" => Some(SimKind::Pearson),
            "pearson_baseline" => Some(SimKind::PearsonBaseline),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub kind: SimKind,
    pub user_based: bool,
    pub min_support: usize,
    /// Only used by [`SimKind::PearsonBaseline`].
    pub shrinkage: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            kind: SimKind::Msd,
            user_based: true,
            min_support: 1,
            shrinkage: 100.0,
        }
    }
}

/// Symmetric similarity matrix over users or items.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub options: SimOptions,
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.values[a * self.n..(a + 1) * self.n]
    }
}

#[derive(Clone, Copy, Default)]
struct PairStats {
    freq: usize,
    prods: f64,
    sq_a: f64,
    sq_b: f64,
    sum_a: f64,
    sum_b: f64,
    sq_diff: f64,
}

impl PairStats {
    fn add(&mut self, ra: f64, rb: f64) {
        self.freq += 1;
        self.prods += ra * rb;
        self.sq_a += ra * ra;
        self.sq_b += rb * rb;
        self.sum_a += ra;
        self.sum_b += rb;
        self.sq_diff += (ra - rb) * (ra - rb);
    }

    fn similarity(&self, options: &SimOptions) -> f64 {
        if self.freq == 0 || self.freq < options.min_support {
            return 0.0;
        }
        let n = self.freq as f64;
        let sim = match options.kind {
            SimKind::Cosine => ratio(self.prods, (self.sq_a * self.sq_b).sqrt()),
            SimKind::Msd => 1.0 / (self.sq_diff / n + 1.0),
            SimKind::Pearson => {
                let num = n * self.prods - self.sum_a * self.sum_b;
                let var_a = (n * self.sq_a - self.sum_a * self.sum_a).max(0.0);
                let var_b = (n * self.sq_b - self.sum_b * self.sum_b).max(0.0);
                ratio(num, var_a.sqrt() * var_b.sqrt())
            }
            SimKind::PearsonBaseline => {
                let shrunk = n - 1.0 + options.shrinkage;
                if shrunk <= 0.0 {
                    0.0
                } else {
                    ratio(self.prods, (self.sq_a * self.sq_b).sqrt()) * (n - 1.0) / shrunk
                }
            }
        };
        sim.clamp(-1.0, 1.0)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 1e-12 {
        num / den
    } else {
        0.0
    }
}

/// Computes the similarity matrix between users (`user_based`) or items.
///
/// `pearson_baseline` works on residuals `r - b_ui`; `baselines` supplies them,
/// otherwise they are fitted with the default ALS settings.
pub fn compute_similarity(
    train: &Trainset,
    options: &SimOptions,
    baselines: Option<&Baselines>,
) -> Result<SimilarityMatrix> {
    let (entities, pivots) = if options.user_based {
        (&train.ur, &train.ir)
    } else {
        (&train.ir, &train.ur)
    };
    let n = entities.len();
    let entries = n.saturating_mul(n);
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge {
            what: "similarity matrix",
            entries,
            limit: MAX_DENSE_ENTRIES,
        });
    }

    let fitted;
    let residual: Option<&Baselines> = if options.kind == SimKind::PearsonBaseline {
        Some(match baselines {
            Some(b) => b,
            None => {
                fitted = fit_baselines(train, &BaselineMethod::default());
                &fitted
            }
        })
    } else {
        None
    };
    // value seen by the kernel for entity `e` on pivot `p`
    let value = |e: usize, p: usize, r: f64| match residual {
        None => r,
        Some(b) if options.user_based => r - b.estimate(e, p),
        Some(b) => r - b.estimate(p, e),
    };

    let mut pivot_lists: Vec<Vec<(usize, f64)>> = pivots
        .iter()
        .enumerate()
        .map(|(p, list)| list.iter().map(|&(e, r)| (e, value(e, p, r))).collect())
        .collect();
    for list in &mut pivot_lists {
        list.sort_unstable_by_key(|&(e, _)| e);
    }

    let mut values = vec![0.0; entries];
    let mut stats = vec![PairStats::default(); n];
    let mut touched = Vec::new();
    for a in 0..n {
        if entities[a].is_empty() {
            continue;
        }
        values[a * n + a] = 1.0;
        for &(p, r) in &entities[a] {
            let ra = value(a, p, r);
            let list = &pivot_lists[p];
            let start = list.partition_point(|&(e, _)| e <= a);
            for &(b, rb) in &list[start..] {
                if stats[b].freq == 0 {
                    touched.push(b);
                }
                stats[b].add(ra, rb);
            }
        }
        for &b in &touched {
            let sim = stats[b].similarity(options);
            values[a * n + b] = sim;
            values[b * n + a] = sim;
            stats[b] = PairStats::default();
        }
        touched.clear();
    }

    Ok(SimilarityMatrix {
        options: options.clone(),
        n,
        values,
    })
}
