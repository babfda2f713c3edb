//! Tree-structured Parzen Estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::parzen::build_parzen;
use super::{Trial, TrialStatus};
use crate::error::{Error, Result};
use crate::space::{self, ParamAssignment, ParamDomain, ParamSpace, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub n_startup: usize,
    pub gamma: f64,
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            n_startup: 20,
            gamma: 0.25,
            n_candidates: 24,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_startup == 0 || self.n_candidates == 0 {
            return Err(Error::InvalidArgument(
                "TPE n_startup and n_candidates must be at least 1".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "TPE gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Splits trials into good and bad sets. The `max(1, ceil(gamma * n_ok))`
/// lowest-loss ok trials are good (earlier index wins ties); every other
/// trial, failed ones included, is bad.
pub fn split_trials(trials: &[Trial], gamma: f64) -> Result<(Vec<&Trial>, Vec<&Trial>)> {
    let mut ok: Vec<&Trial> = trials.iter().filter(|t| t.is_ok()).collect();
    if ok.is_empty() {
        return Err(Error::NoOkTrials);
    }
    ok.sort_by(|a, b| {
        a.loss
            .unwrap_or(f64::INFINITY)
            .total_cmp(&b.loss.unwrap_or(f64::INFINITY))
            .then(a.index.cmp(&b.index))
    });
    let n_good = ((gamma * ok.len() as f64).ceil() as usize).clamp(1, ok.len());
    let mut bad = ok.split_off(n_good);
    bad.extend(trials.iter().filter(|t| t.status == TrialStatus::Failed));
    Ok((ok, bad))
}

/// Proposes the next assignment given the trial history.
pub fn tpe_suggest<R: Rng + ?Sized>(
    trials: &[Trial],
    space: &ParamSpace,
    config: &TpeConfig,
    rng: &mut R,
) -> Result<ParamAssignment> {
    config.validate()?;
    let n_ok = trials.iter().filter(|t| t.is_ok()).count();
    if n_ok < config.n_startup {
        return Ok(space::sample(space, rng));
    }
    let (good, bad) = split_trials(trials, config.gamma)?;
    let mut out = ParamAssignment::new();
    suggest_into(space, &good, &bad, config, rng, &mut out);
    Ok(out)
}

fn suggest_into<R: Rng + ?Sized>(
    space: &ParamSpace,
    good: &[&Trial],
    bad: &[&Trial],
    config: &TpeConfig,
    rng: &mut R,
    out: &mut ParamAssignment,
) {
    for (name, domain) in space.iter() {
        let values = |set: &[&Trial]| -> Vec<ParamValue> {
            set.iter().filter_map(|t| t.assignment.get(name).cloned()).collect()
        };
        let l = build_parzen(&values(good), domain);
        let g = build_parzen(&values(bad), domain);

        let mut best: Option<(f64, ParamValue)> = None;
        for _ in 0..config.n_candidates {
            let x = l.sample(rng);
            let score = l.log_pdf(&x) - g.log_pdf(&x);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, x));
            }
        }
        let (_, chosen) = best.expect("at least one candidate");

        if let ParamDomain::Choice { .. } = domain {
            let label = chosen.as_label().expect("choice densities yield labels").to_owned();
            let option = domain.option(&label).expect("label drawn from the domain");
            if !option.space.is_empty() {
                let (good, bad) = (on_branch(good, name, &label), on_branch(bad, name, &label));
                out.insert(name, chosen);
                suggest_into(&option.space, &good, &bad, config, rng, out);
                continue;
            }
        }
        out.insert(name, chosen);
    }
}

fn on_branch<'t>(set: &[&'t Trial], name: &str, label: &str) -> Vec<&'t Trial> {
    set.iter()
        .copied()
        .filter(|t| t.assignment.get(name).and_then(ParamValue::as_label) == Some(label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::AlgorithmSpec;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn trial(index: usize, x: f64, loss: Option<f64>) -> Trial {
        Trial::new(index, ParamAssignment::new().with("x", x), loss.ok_or("boom".to_string()))
    }

    #[test]
    fn split_sizes() {
        let four: Vec<Trial> = (0..4).map(|i| trial(i, 0.0, Some(4.0 - i as f64))).collect();
        let (good, bad) = split_trials(&four, 0.25).unwrap();
        assert_eq!(good.len(), 1);
        assert_eq!(good[0].index, 3);
        assert_eq!(bad.len(), 3);

        let twenty: Vec<Trial> = (0..20).map(|i| trial(i, 0.0, Some(i as f64))).collect();
        assert_eq!(split_trials(&twenty, 0.25).unwrap().0.len(), 5);
    }

    #[test]
    fn split_ties_and_failures() {
        let trials = vec![
            trial(0, 0.0, Some(2.0)),
            trial(1, 0.0, Some(1.0)),
            trial(2, 0.0, None),
            trial(3, 0.0, Some(1.0)),
        ];
        let (good, bad) = split_trials(&trials, 0.1).unwrap();
        assert_eq!(good.iter().map(|t| t.index).collect::<Vec<_>>(), vec![1]);
        assert_eq!(bad.iter().map(|t| t.index).collect::<Vec<_>>(), vec![3, 0, 2]);
        assert!(matches!(split_trials(&trials[2..3], 0.25), Err(Error::NoOkTrials)));
    }

    #[test]
    fn equal_losses_still_suggest() {
        let trials: Vec<Trial> = (0..25).map(|i| trial(i, i as f64 / 3.0, Some(1.0))).collect();
        let (good, _) = split_trials(&trials, 0.25).unwrap();
        assert_eq!(good.len(), 7);
        let space = ParamSpace::new().with("x", ParamDomain::Uniform { low: 0.0, high: 10.0 });
        let a = tpe_suggest(&trials, &space, &TpeConfig::default(), &mut seed::rng(0)).unwrap();
        space.check_assignment(&a).unwrap();
    }

    #[test]
    fn single_option_choice() {
        let space = ParamSpace::new().with("c", ParamDomain::choice(&["only"]));
        let trials: Vec<Trial> = (0..30)
            .map(|i| Trial::new(i, ParamAssignment::new().with("c", "only"), Ok(i as f64)))
            .collect();
        let mut rng = seed::rng(3);
        for _ in 0..20 {
            let a = tpe_suggest(&trials, &space, &TpeConfig::default(), &mut rng).unwrap();
            assert_eq!(a.get("c").unwrap().as_label(), Some("only"));
        }
    }

    #[test]
    fn concentrates_near_good_region() {
        let space = ParamSpace::new().with("x", ParamDomain::Uniform { low: 0.0, high: 10.0 });
        let mut rng = seed::rng(11);
        let trials: Vec<Trial> = (0..30)
            .map(|i| {
                let x: f64 = rng.random_range(0.0..10.0);
                trial(i, x, Some((x - 2.0).abs()))
            })
            .collect();
        let config = TpeConfig::default();
        let inside = (0..200)
            .filter(|_| {
                let a = tpe_suggest(&trials, &space, &config, &mut rng).unwrap();
                (0.0..=4.0).contains(&a.get("x").unwrap().as_f64().unwrap())
            })
            .count();
        assert!(inside >= 140, "{inside}/200 suggestions in [0, 4]");
    }

    #[test]
    fn nested_branches_follow_choice() {
        let space = space::default_space(AlgorithmSpec::BaselineOnly);
        let mut rng = seed::rng(5);
        let mut trials = Vec::new();
        for i in 0..40 {
            let a = space::sample(&space, &mut rng);
            let loss = if a.get("method").unwrap().as_label() == Some("sgd") { 0.5 } else { 1.0 };
            trials.push(Trial::new(i, a, Ok(loss)));
        }
        let sgd = (0..100)
            .filter(|_| {
                let a = tpe_suggest(&trials, &space, &TpeConfig::default(), &mut rng).unwrap();
                space.check_assignment(&a).unwrap();
                a.get("method").unwrap().as_label() == Some("sgd")
            })
            .count();
        assert!(sgd > 60, "{sgd}");
    }

    #[test]
    fn rejects_bad_config() {
        for c in [
            TpeConfig { n_startup: 0, ..TpeConfig::default() },
            TpeConfig { n_candidates: 0, ..TpeConfig::default() },
            TpeConfig { gamma: 1.0, ..TpeConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn suggestions_are_domain_valid(seed in any::<u64>(), algo in 0usize..11, n in 0usize..40) {
            let algo = AlgorithmSpec::ALL[algo];
            let space = space::default_space(algo);
            let mut rng = seed::rng(seed);
            let config = TpeConfig { n_startup: 5, ..TpeConfig::default() };
            let mut trials = Vec::new();
            for i in 0..n {
                let a = tpe_suggest(&trials, &space, &config, &mut rng).unwrap();
                prop_assert!(space.check_assignment(&a).is_ok(), "{}", a);
                let loss: f64 = rng.random();
                let outcome = if i % 7 == 3 { Err("failed".to_string()) } else { Ok(loss) };
                trials.push(Trial::new(i, a, outcome));
            }
        }
    }
}
