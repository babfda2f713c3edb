//! One-dimensional Parzen densities used by TPE.

use rand::Rng;
use statrs::function::erf::erf;

use crate::space::{ParamDomain, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coords {
    Linear,
    Log,
    Integer,
}

/// Mixture of truncated Gaussians centred on observations plus one uniform
/// prior component, all equally weighted. Values live in model coordinates:
/// log scale for log-uniform domains, and `[low - 0.5, high + 0.5]` for
/// integer domains.
#[derive(Debug, Clone)]
pub struct ContinuousParzen {
    coords: Coords,
    low: f64,
    high: f64,
    /// Integer domains keep their true bounds for rounding.
    int_bounds: (i64, i64),
    pub mus: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// `mus.len() + 1` weights; the last one belongs to the prior.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum ParzenDensity {
    Continuous(ContinuousParzen),
    Categorical { labels: Vec<String>, probs: Vec<f64> },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Builds the density of `values` over `domain`. Values outside the domain or
/// of the wrong kind are ignored.
pub fn build_parzen(values: &[ParamValue], domain: &ParamDomain) -> ParzenDensity {
    match domain {
        ParamDomain::Choice { options } => {
            let labels: Vec<String> = options.iter().map(|o| o.label.clone()).collect();
            let mut counts = vec![1.0; labels.len()];
            for v in values {
                if let Some(k) = v.as_label().and_then(|l| labels.iter().position(|x| x == l)) {
                    counts[k] += 1.0;
                }
            }
            let total: f64 = counts.iter().sum();
            ParzenDensity::Categorical {
                labels,
                probs: counts.into_iter().map(|c| c / total).collect(),
            }
        }
        _ => ParzenDensity::Continuous(ContinuousParzen::new(values, domain)),
    }
}

impl ContinuousParzen {
    fn new(values: &[ParamValue], domain: &ParamDomain) -> Self {
        let (coords, low, high, int_bounds) = match *domain {
            ParamDomain::Uniform { low, high } => (Coords::Linear, low, high, (0, 0)),
            ParamDomain::LogUniform { low, high } => (Coords::Log, low.ln(), high.ln(), (0, 0)),
            ParamDomain::IntUniform { low, high } => {
                (Coords::Integer, low as f64 - 0.5, high as f64 + 0.5, (low, high))
            }
            ParamDomain::Choice { .. } => unreachable!("handled by build_parzen"),
        };
        let mut mus: Vec<f64> = values
            .iter()
            .filter(|v| domain.contains(v))
            .filter_map(ParamValue::as_f64)
            .map(|x| if coords == Coords::Log { x.ln() } else { x })
            .collect();
        mus.sort_by(f64::total_cmp);

        let n = mus.len();
        let range = high - low;
        let min_bw = range / (n as f64 + 1.0).min(100.0);
        let sigmas = (0..n)
            .map(|k| {
                let left = if k == 0 { low } else { mus[k - 1] };
                let right = if k + 1 == n { high } else { mus[k + 1] };
                (mus[k] - left).max(right - mus[k]).clamp(min_bw, range)
            })
            .collect();
        let weights = vec![1.0 / (n as f64 + 1.0); n + 1];
        Self {
            coords,
            low,
            high,
            int_bounds,
            mus,
            sigmas,
            weights,
        }
    }

    /// Density at `x` in model coordinates.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.low || x > self.high {
            return 0.0;
        }
        let mut p = self.weights[self.mus.len()] / (self.high - self.low);
        for ((&mu, &sigma), &w) in self.mus.iter().zip(&self.sigmas).zip(&self.weights) {
            let mass = std_normal_cdf((self.high - mu) / sigma) - std_normal_cdf((self.low - mu) / sigma);
            p += w * std_normal_pdf((x - mu) / sigma) / (sigma * mass);
        }
        p
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.low, self.high)
    }

    fn to_model(&self, value: &ParamValue) -> Option<f64> {
        let x = value.as_f64()?;
        Some(if self.coords == Coords::Log { x.ln() } else { x })
    }

    fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let pick: f64 = rng.random();
        let mut acc = 0.0;
        let mut component = self.mus.len();
        for (k, w) in self.weights.iter().enumerate().take(self.mus.len()) {
            acc += w;
            if pick < acc {
                component = k;
                break;
            }
        }
        if component == self.mus.len() {
            return rng.random_range(self.low..self.high);
        }
        let (mu, sigma) = (self.mus[component], self.sigmas[component]);
        let normal = rand_distr::Normal::new(mu, sigma).expect("positive bandwidth");
        for _ in 0..1000 {
            let x = rand_distr::Distribution::sample(&normal, rng);
            if (self.low..=self.high).contains(&x) {
                return x;
            }
        }
        mu
    }

    fn to_value(&self, x: f64) -> ParamValue {
        match self.coords {
            Coords::Linear => ParamValue::Real(x.clamp(self.low, self.high)),
            Coords::Log => ParamValue::Real(x.exp().clamp(self.low.exp(), self.high.exp())),
            Coords::Integer => {
                let (lo, hi) = self.int_bounds;
                ParamValue::Int((x.round() as i64).clamp(lo, hi))
            }
        }
    }
}

impl ParzenDensity {
    /// Log-density of a domain value (model coordinates for continuous
    /// domains, probability mass for choices).
    pub fn log_pdf(&self, value: &ParamValue) -> f64 {
        match self {
            ParzenDensity::Continuous(c) => c.to_model(value).map_or(f64::NEG_INFINITY, |x| c.pdf(x).ln()),
            ParzenDensity::Categorical { labels, probs } => value
                .as_label()
                .and_then(|l| labels.iter().position(|x| x == l))
                .map_or(f64::NEG_INFINITY, |k| probs[k].ln()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match self {
            ParzenDensity::Continuous(c) => c.to_value(c.sample_model(rng)),
            ParzenDensity::Categorical { labels, probs } => {
                let pick: f64 = rng.random();
                let mut acc = 0.0;
                for (label, p) in labels.iter().zip(probs) {
                    acc += p;
                    if pick < acc {
                        return ParamValue::Label(label.clone());
                    }
                }
                ParamValue::Label(labels.last().expect("non-empty choice").clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use approx::assert_abs_diff_eq;

    fn integrate(c: &ContinuousParzen, steps: usize) -> f64 {
        // composite Simpson over the support
        let (a, b) = c.bounds();
        let h = (b - a) / steps as f64;
        let mut s = c.pdf(a) + c.pdf(b);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * c.pdf(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn empty_observations_give_the_prior() {
        let d = ParamDomain::Uniform { low: 0.0, high: 10.0 };
        let ParzenDensity::Continuous(c) = build_parzen(&[], &d) else {
            panic!()
        };
        assert!(c.mus.is_empty());
        assert_abs_diff_eq!(c.pdf(3.3), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate(&c, 1000), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn choice_counts() {
        let d = ParamDomain::choice(&["a", "b", "c"]);
        let obs: Vec<ParamValue> = ["a", "a", "b"].iter().map(|&s| s.into()).collect();
        let ParzenDensity::Categorical { probs, .. } = build_parzen(&obs, &d) else {
            panic!()
        };
        assert_abs_diff_eq!(probs[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(probs[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(probs[2], 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn single_observation_normalizes() {
        let d = ParamDomain::Uniform { low: 0.0, high: 10.0 };
        let ParzenDensity::Continuous(c) = build_parzen(&[5.0.into()], &d) else {
            panic!()
        };
        assert_eq!(c.mus, vec![5.0]);
        // distance to either bound is 5, inside the clip range [10/2, 10]
        assert_eq!(c.sigmas, vec![5.0]);
        assert_abs_diff_eq!(integrate(&c, 2000), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn many_observations_normalize() {
        for d in [
            ParamDomain::Uniform { low: -3.0, high: 7.0 },
            ParamDomain::LogUniform { low: 1e-4, high: 1e-1 },
            ParamDomain::IntUniform { low: 2, high: 100 },
        ] {
            let mut rng = seed::rng(1);
            let obs: Vec<ParamValue> = (0..40).map(|_| d.sample_value(&mut rng)).collect();
            let ParzenDensity::Continuous(c) = build_parzen(&obs, &d) else {
                panic!()
            };
            assert_abs_diff_eq!(integrate(&c, 20_000), 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn bandwidth_is_clipped_below() {
        let d = ParamDomain::Uniform { low: 0.0, high: 10.0 };
        let obs: Vec<ParamValue> = [5.0, 5.0, 5.0].iter().map(|&x| x.into()).collect();
        let ParzenDensity::Continuous(c) = build_parzen(&obs, &d) else {
            panic!()
        };
        // the middle duplicate has zero neighbor distance; floor is range / (n + 1)
        assert_eq!(c.sigmas[1], 2.5);
    }

    #[test]
    fn samples_stay_in_domain() {
        let mut rng = seed::rng(4);
        for d in [
            ParamDomain::Uniform { low: 0.0, high: 1.0 },
            ParamDomain::LogUniform { low: 1e-3, high: 0.5 },
            ParamDomain::IntUniform { low: 1, high: 5 },
        ] {
            let obs: Vec<ParamValue> = (0..10).map(|_| d.sample_value(&mut rng)).collect();
            let p = build_parzen(&obs, &d);
            for _ in 0..500 {
                let v = p.sample(&mut rng);
                assert!(d.contains(&v), "{v:?} outside {d:?}");
                assert!(p.log_pdf(&v).is_finite());
            }
        }
    }
}
