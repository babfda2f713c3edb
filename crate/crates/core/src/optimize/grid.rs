//! Exhaustive grid search.

use std::time::Instant;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{best_trial, evaluate_trial, trial_seed, AlgorithmObjective, Objective, Trial};
use crate::algorithms::AlgorithmSpec;
use crate::dataset::{FoldPlan, RatingsTable};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::space::{ParamAssignment, ParamDomain, ParamSpace, ParamValue};

/// Named value lists, kept in declaration order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid {
    dims: IndexMap<String, Vec<ParamValue>>,
}

fn grid_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("grid key `{key}`: {msg}"))
}

impl Grid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        self.dims.insert(name.to_owned(), values);
        self
    }

    /// Parses `{"name": [v1, v2, ...], ...}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidArgument("grid must be a JSON object".into()))?;
        let mut grid = Grid::new();
        for (key, list) in obj {
            let list = list.as_array().ok_or_else(|| grid_err(key, "expected an array of values"))?;
            let values = list
                .iter()
                .map(|v| ParamValue::from_json(v).ok_or_else(|| grid_err(key, format!("unsupported value {v}"))))
                .collect::<Result<Vec<_>>>()?;
            grid.dims.insert(key.clone(), values);
        }
        Ok(grid)
    }

    pub fn dims(&self) -> impl Iterator<Item = (&str, &[ParamValue])> {
        self.dims.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Number of points in the cartesian product.
    pub fn len(&self) -> usize {
        self.dims.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that every key names a parameter of `space` and every value has
    /// the parameter's kind. Numeric values outside the search range are
    /// accepted: grids commonly probe beyond the ranges used for sampling.
    pub fn validate(&self, space: &ParamSpace) -> Result<()> {
        for (key, values) in &self.dims {
            if values.is_empty() {
                return Err(grid_err(key, "empty value list"));
            }
            let domain = space.find(key).ok_or_else(|| grid_err(key, "not a parameter of this algorithm"))?;
            for v in values {
                let fits = match (domain, v) {
                    (ParamDomain::IntUniform { .. }, ParamValue::Int(_)) => true,
                    (ParamDomain::Uniform { .. } | ParamDomain::LogUniform { .. }, v) => {
                        v.as_f64().is_some_and(f64::is_finite)
                    }
                    (ParamDomain::Choice { .. }, ParamValue::Label(l)) => domain.option(l).is_some(),
                    _ => false,
                };
                if !fits {
                    return Err(grid_err(key, format!("value {v} does not fit {domain:?}")));
                }
            }
        }
        Ok(())
    }

    /// All points, last dimension varying fastest.
    pub fn points(&self) -> Vec<ParamAssignment> {
        let dims: Vec<(&String, &Vec<ParamValue>)> = self.dims.iter().collect();
        let total = self.len();
        let mut out = Vec::with_capacity(total);
        let mut counter = vec![0usize; dims.len()];
        for _ in 0..total {
            let mut a = ParamAssignment::new();
            for ((name, values), &k) in dims.iter().zip(&counter) {
                a.insert(name, values[k].clone());
            }
            out.push(a);
            for d in (0..dims.len()).rev() {
                counter[d] += 1;
                if counter[d] < dims[d].1.len() {
                    break;
                }
                counter[d] = 0;
            }
        }
        out
    }

    /// The tightest flat space covering the grid: numeric dimensions keep the
    /// kind of their domain in `space` with bounds at the listed extremes,
    /// choices keep only the listed options. Lets a model-based search run
    /// over the same region as the grid.
    pub fn hull(&self, space: &ParamSpace) -> Result<ParamSpace> {
        self.validate(space)?;
        let mut out = ParamSpace::new();
        for (key, values) in &self.dims {
            let nums = || values.iter().filter_map(ParamValue::as_f64);
            let lo = nums().fold(f64::INFINITY, f64::min);
            let hi = nums().fold(f64::NEG_INFINITY, f64::max);
            let domain = match space.find(key).expect("validated") {
                ParamDomain::IntUniform { .. } => ParamDomain::IntUniform {
                    low: lo as i64,
                    high: hi as i64,
                },
                ParamDomain::Uniform { .. } => ParamDomain::Uniform { low: lo, high: hi },
                ParamDomain::LogUniform { .. } => ParamDomain::LogUniform { low: lo, high: hi },
                d @ ParamDomain::Choice { .. } => {
                    let mut options = Vec::new();
                    for v in values {
                        let opt = d.option(v.as_label().expect("validated")).expect("validated");
                        if !options.contains(opt) {
                            options.push(opt.clone());
                        }
                    }
                    ParamDomain::Choice { options }
                }
            };
            out = out.with(key, domain);
        }
        out.validate()?;
        Ok(out)
    }

    /// The comparison grid shipped for `algo`, if any.
    pub fn default_for(algo: AlgorithmSpec) -> Option<Grid> {
        let reals = |xs: &[f64]| xs.iter().map(|&x| ParamValue::Real(x)).collect();
        let ints = |xs: &[i64]| xs.iter().map(|&x| ParamValue::Int(x)).collect();
        let labels = |xs: &[&str]| xs.iter().map(|&x| ParamValue::from(x)).collect();
        match algo {
            AlgorithmSpec::Svd => Some(
                Grid::new()
                    .with("n_factors", ints(&[50, 100, 150]))
                    .with("n_epochs", ints(&[20, 30]))
                    .with("lr", reals(&[0.002, 0.005, 0.01]))
                    .with("reg", reals(&[0.02, 0.1])),
            ),
            AlgorithmSpec::KnnBaseline => Some(
                Grid::new()
                    .with("k", ints(&[20, 40, 60]))
                    .with("sim", labels(&["msd", "pearson_baseline"]))
                    .with("user_based", labels(&["true", "false"])),
            ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: Trial,
    pub trials: Vec<Trial>,
    pub wall_time: f64,
}

/// Evaluates every grid point in order. The best trial is the lowest loss,
/// earliest point on ties.
pub fn grid_search_objective(
    objective: &dyn Objective,
    grid: &Grid,
    seed: u64,
    mut progress: impl FnMut(&Trial),
) -> Result<GridOutcome> {
    grid.validate(objective.space())?;
    let started = Instant::now();
    let mut trials = Vec::with_capacity(grid.len());
    for (index, point) in grid.points().into_iter().enumerate() {
        let eval_seed = trial_seed(seed, objective.name(), index, "eval");
        let t = evaluate_trial(objective, index, point, eval_seed);
        progress(&t);
        trials.push(t);
    }
    let best = best_trial(&trials).cloned().ok_or(Error::NoOkTrials)?;
    Ok(GridOutcome {
        best,
        trials,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

pub fn grid_search(
    algo: AlgorithmSpec,
    grid: &Grid,
    table: &RatingsTable,
    folds: &FoldPlan,
    metric: Metric,
    seed: u64,
) -> Result<GridOutcome> {
    let objective = AlgorithmObjective::new(algo, table, folds, metric);
    grid_search_objective(&objective, grid, seed, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::FnObjective;
    use crate::space::default_space;

    fn space3() -> ParamSpace {
        ParamSpace::new()
            .with("a", ParamDomain::IntUniform { low: 0, high: 10 })
            .with("b", ParamDomain::Uniform { low: 0.0, high: 1.0 })
            .with("c", ParamDomain::choice(&["x", "y"]))
    }

    fn grid3() -> Grid {
        Grid::new()
            .with("a", vec![1.into(), 2.into(), 3.into()])
            .with("b", vec![0.1.into(), 0.2.into(), 0.3.into(), 0.4.into()])
            .with("c", vec!["x".into(), "y".into()])
    }

    #[test]
    fn product_size_and_order() {
        let pts = grid3().points();
        assert_eq!(pts.len(), 24);
        assert_eq!(pts[0].to_string(), ParamAssignment::new().with("a", 1).with("b", 0.1).with("c", "x").to_string());
        assert_eq!(pts[1].get("c").unwrap().as_label(), Some("y"));
        assert_eq!(pts[2].get("b").unwrap().as_f64(), Some(0.2));
        assert_eq!(pts[23].get("a").unwrap().as_f64(), Some(3.0));
    }

    #[test]
    fn plants_the_optimum() {
        let obj = FnObjective::new("planted", space3(), |a, _| {
            let x = a.get("a").unwrap().as_f64().unwrap();
            let y = a.get("b").unwrap().as_f64().unwrap();
            let c = if a.get("c").unwrap().as_label() == Some("y") { 0.0 } else { 1.0 };
            Ok((x - 2.0).powi(2) + (y - 0.3).powi(2) + c)
        });
        let out = grid_search_objective(&obj, &grid3(), 0, |_| {}).unwrap();
        assert_eq!(out.trials.len(), 24);
        assert_eq!(out.best.assignment, ParamAssignment::new().with("a", 2).with("b", 0.3).with("c", "y"));
    }

    #[test]
    fn single_point() {
        let obj = FnObjective::new("one", space3(), |_, _| Ok(0.5));
        let grid = Grid::new().with("a", vec![4.into()]);
        let out = grid_search_objective(&obj, &grid, 0, |_| {}).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best, out.trials[0]);
    }

    #[test]
    fn ties_go_to_the_earlier_point() {
        let obj = FnObjective::new("flat", space3(), |_, _| Ok(1.0));
        let out = grid_search_objective(&obj, &grid3(), 0, |_| {}).unwrap();
        assert_eq!(out.best.index, 0);
    }

    #[test]
    fn validation_names_the_key() {
        let s = space3();
        let empty = Grid::new().with("a", vec![]);
        assert!(empty.validate(&s).unwrap_err().to_string().contains("`a`"));
        let unknown = Grid::new().with("zz", vec![1.into()]);
        assert!(unknown.validate(&s).unwrap_err().to_string().contains("`zz`"));
        let kind = Grid::new().with("c", vec!["w".into()]);
        assert!(kind.validate(&s).is_err());
        let int = Grid::new().with("a", vec![1.5.into()]);
        assert!(int.validate(&s).is_err());
    }

    #[test]
    fn json_round_trip_keeps_order() {
        let g = Grid::from_json(r#"{"z": [1, 2], "a": ["x"], "m": [0.5]}"#).unwrap();
        assert_eq!(g.dims().map(|(k, _)| k).collect::<Vec<_>>(), vec!["z", "a", "m"]);
        assert_eq!(Grid::from_json(&serde_json::to_string(&g).unwrap()).unwrap(), g);
        assert!(Grid::from_json(r#"{"z": 3}"#).unwrap_err().to_string().contains("`z`"));
        assert!(Grid::from_json("[1]").is_err());
    }

    #[test]
    fn hull_covers_every_point() {
        let s = space3();
        let g = Grid::new()
            .with("c", vec!["y".into()])
            .with("a", vec![7.into(), 2.into()])
            .with("b", vec![0.4.into(), 0.1.into(), 0.3.into()]);
        let h = g.hull(&s).unwrap();
        assert_eq!(h.get("a"), Some(&ParamDomain::IntUniform { low: 2, high: 7 }));
        assert_eq!(h.get("b"), Some(&ParamDomain::Uniform { low: 0.1, high: 0.4 }));
        assert_eq!(h.get("c"), Some(&ParamDomain::choice(&["y"])));
        for p in g.points() {
            h.check_assignment(&p).unwrap();
        }
        let svd = Grid::default_for(AlgorithmSpec::Svd).unwrap();
        let h = svd.hull(&default_space(AlgorithmSpec::Svd)).unwrap();
        assert_eq!(h.get("lr"), Some(&ParamDomain::LogUniform { low: 0.002, high: 0.01 }));
        // a single real value has no extent
        assert!(Grid::new().with("b", vec![0.5.into()]).hull(&s).is_err());
    }

    #[test]
    fn default_grids() {
        let svd = Grid::default_for(AlgorithmSpec::Svd).unwrap();
        assert_eq!(svd.len(), 36);
        svd.validate(&default_space(AlgorithmSpec::Svd)).unwrap();
        let knn = Grid::default_for(AlgorithmSpec::KnnBaseline).unwrap();
        assert_eq!(knn.len(), 12);
        knn.validate(&default_space(AlgorithmSpec::KnnBaseline)).unwrap();
        assert!(Grid::default_for(AlgorithmSpec::SlopeOne).is_none());
    }
}
