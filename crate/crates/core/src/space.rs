//! Tree-structured hyperparameter spaces.
//!
//! A [`ParamSpace`] maps parameter names to domains. A [`ParamDomain::Choice`]
//! option may carry a nested space whose parameters only exist when that option
//! is selected, which is what makes the space a tree.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::AlgorithmSpec;
use crate::error::{Error, Result};

/// A concrete hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Label(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(v) => Some(v as f64),
            ParamValue::Real(v) => Some(v),
            ParamValue::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            ParamValue::Label(s) => Some(s),
            _ => None,
        }
    }

    /// Converts a JSON scalar, mapping booleans to the labels `"true"`/`"false"`.
    pub fn from_json(value: &serde_json::Value) -> Option<Self> {
        match value {
            serde_json::Value::Bool(b) => Some(ParamValue::Label(b.to_string())),
            serde_json::Value::String(s) => Some(ParamValue::Label(s.clone())),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(ParamValue::Int)
                .or_else(|| n.as_f64().map(ParamValue::Real)),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Label(s) => f.write_str(s),
        }
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Label(s.to_string())
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

/// One selectable option of a [`ParamDomain::Choice`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceOption {
    pub label: String,
    #[serde(default, skip_serializing_if = "ParamSpace::is_empty")]
    pub space: ParamSpace,
}

impl ChoiceOption {
    pub fn leaf(label: &str) -> Self {
        Self {
            label: label.to_string(),
            space: ParamSpace::default(),
        }
    }

    pub fn nested(label: &str, space: ParamSpace) -> Self {
        Self {
            label: label.to_string(),
            space,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamDomain {
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    IntUniform { low: i64, high: i64 },
    Choice { options: Vec<ChoiceOption> },
}

impl ParamDomain {
    pub fn choice(labels: &[&str]) -> Self {
        ParamDomain::Choice {
            options: labels.iter().map(|l| ChoiceOption::leaf(l)).collect(),
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        let ok = match *self {
            ParamDomain::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            ParamDomain::LogUniform { low, high } => {
                low.is_finite() && high.is_finite() && low > 0.0 && low < high
            }
            ParamDomain::IntUniform { low, high } => low <= high,
            ParamDomain::Choice { ref options } => {
                let mut labels: Vec<&str> = options.iter().map(|o| o.label.as_str()).collect();
                labels.sort_unstable();
                labels.dedup();
                !options.is_empty() && labels.len() == options.len()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(name, format!("malformed domain {self:?}")))
        }
    }

    /// Whether `value` is a member of this domain (ignoring nested spaces).
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (ParamDomain::Uniform { low, high }, v) | (ParamDomain::LogUniform { low, high }, v) => {
                v.as_f64().is_some_and(|x| x >= *low && x <= *high)
            }
            (ParamDomain::IntUniform { low, high }, ParamValue::Int(v)) => v >= low && v <= high,
            (ParamDomain::Choice { options }, ParamValue::Label(l)) => {
                options.iter().any(|o| &o.label == l)
            }
            _ => false,
        }
    }

    pub fn option(&self, label: &str) -> Option<&ChoiceOption> {
        match self {
            ParamDomain::Choice { options } => options.iter().find(|o| o.label == label),
            _ => None,
        }
    }

    /// Draws one value from the domain's prior.
    pub fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match *self {
            ParamDomain::Uniform { low, high } => {
                ParamValue::Real(rng.random_range(low..high).clamp(low, high))
            }
            ParamDomain::LogUniform { low, high } => {
                let x = rng.random_range(low.ln()..high.ln()).exp();
                ParamValue::Real(x.clamp(low, high))
            }
            ParamDomain::IntUniform { low, high } => ParamValue::Int(rng.random_range(low..=high)),
            ParamDomain::Choice { ref options } => {
                ParamValue::Label(options[rng.random_range(0..options.len())].label.clone())
            }
        }
    }
}

/// Named mapping of parameter → domain. Iteration order is declaration order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSpace {
    params: IndexMap<String, ParamDomain>,
}

impl ParamSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, domain: ParamDomain) -> Self {
        self.params.insert(name.to_string(), domain);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamDomain)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn get(&self, name: &str) -> Option<&ParamDomain> {
        self.params.get(name)
    }

    /// Checks domain invariants and that names are unique along every
    /// root-to-leaf path.
    pub fn validate(&self) -> Result<()> {
        self.validate_path(&mut Vec::new())
    }

    fn validate_path<'a>(&'a self, path: &mut Vec<&'a str>) -> Result<()> {
        for (name, domain) in &self.params {
            domain.check(name)?;
            if path.contains(&name.as_str()) {
                return Err(Error::param(name, "name repeated along a nested path"));
            }
        }
        let depth = path.len();
        path.extend(self.params.keys().map(String::as_str));
        for domain in self.params.values() {
            if let ParamDomain::Choice { options } = domain {
                for option in options {
                    option.space.validate_path(path)?;
                }
            }
        }
        path.truncate(depth);
        Ok(())
    }

    /// Finds a domain anywhere in the tree.
    pub fn find(&self, name: &str) -> Option<&ParamDomain> {
        if let Some(d) = self.params.get(name) {
            return Some(d);
        }
        self.params.values().find_map(|d| match d {
            ParamDomain::Choice { options } => options.iter().find_map(|o| o.space.find(name)),
            _ => None,
        })
    }

    /// Checks that `assignment` covers exactly the active path with in-domain
    /// values.
    pub fn check_assignment(&self, assignment: &ParamAssignment) -> Result<()> {
        let mut active = 0;
        self.check_active(assignment, &mut active, true)?;
        if active != assignment.len() {
            let extra = assignment
                .iter()
                .map(|(k, _)| k)
                .find(|k| self.active_contains(assignment, k).is_none())
                .unwrap_or("?");
            return Err(Error::param(extra, "not part of the active parameter path"));
        }
        Ok(())
    }

    /// Like [`check_assignment`](Self::check_assignment) but tolerates missing
    /// parameters (defaults fill them in later).
    pub fn check_partial(&self, assignment: &ParamAssignment) -> Result<()> {
        let mut active = 0;
        self.check_active(assignment, &mut active, false)?;
        if active != assignment.len() {
            let extra = assignment
                .iter()
                .map(|(k, _)| k)
                .find(|k| self.active_contains(assignment, k).is_none())
                .unwrap_or("?");
            return Err(Error::param(extra, "not part of the active parameter path"));
        }
        Ok(())
    }

    fn check_active(
        &self,
        assignment: &ParamAssignment,
        active: &mut usize,
        require_all: bool,
    ) -> Result<()> {
        for (name, domain) in &self.params {
            let Some(value) = assignment.get(name) else {
                if require_all {
                    return Err(Error::param(name, "missing"));
                }
                continue;
            };
            if !domain.contains(value) {
                return Err(Error::param(name, format!("value {value} outside {domain:?}")));
            }
            *active += 1;
            if let (ParamDomain::Choice { .. }, ParamValue::Label(label)) = (domain, value) {
                let option = domain.option(label).expect("membership checked above");
                option.space.check_active(assignment, active, require_all)?;
            }
        }
        Ok(())
    }

    fn active_contains(&self, assignment: &ParamAssignment, name: &str) -> Option<()> {
        for (key, domain) in &self.params {
            if key == name {
                return Some(());
            }
            if let Some(ParamValue::Label(label)) = assignment.get(key) {
                if let Some(option) = domain.option(label) {
                    if option.space.active_contains(assignment, name).is_some() {
                        return Some(());
                    }
                }
            }
        }
        None
    }

    /// Removes parameters that are not on the active path of `assignment`.
    pub fn prune_inactive(&self, assignment: &ParamAssignment) -> ParamAssignment {
        let mut out = ParamAssignment::new();
        self.copy_active(assignment, &mut out);
        out
    }

    fn copy_active(&self, from: &ParamAssignment, out: &mut ParamAssignment) {
        for (name, domain) in &self.params {
            if let Some(value) = from.get(name) {
                out.insert(name, value.clone());
                if let ParamValue::Label(label) = value {
                    if let Some(option) = domain.option(label) {
                        option.space.copy_active(from, out);
                    }
                }
            }
        }
    }
}

/// One concrete point of a space.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamAssignment {
    values: BTreeMap<String, ParamValue>,
}

impl ParamAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.insert(name, value.into());
        self
    }

    pub fn insert(&mut self, name: &str, value: ParamValue) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn real(&self, name: &str) -> Result<Option<f64>> {
        match self.values.get(name) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::param(name, format!("expected a number, got {v}"))),
        }
    }

    pub fn count(&self, name: &str) -> Result<Option<usize>> {
        match self.values.get(name) {
            None => Ok(None),
            Some(ParamValue::Int(v)) if *v >= 0 => Ok(Some(*v as usize)),
            Some(ParamValue::Real(v)) if *v >= 0.0 && v.fract() == 0.0 => Ok(Some(*v as usize)),
            Some(v) => Err(Error::param(
                name,
                format!("expected a non-negative integer, got {v}"),
            )),
        }
    }

    pub fn label(&self, name: &str) -> Result<Option<&str>> {
        match self.values.get(name) {
            None => Ok(None),
            Some(ParamValue::Label(s)) => Ok(Some(s)),
            Some(v) => Err(Error::param(name, format!("expected a label, got {v}"))),
        }
    }

    pub fn flag(&self, name: &str) -> Result<Option<bool>> {
        match self.label(name)? {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(other) => Err(Error::param(name, format!("expected true/false, got {other}"))),
        }
    }
}

impl fmt::Display for ParamAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, (k, v)) in self.values.iter().enumerate() {
            if n > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        f.write_str("}")
    }
}

/// Draws one assignment from the prior: uniform, log-uniform, inclusive
/// integer-uniform, and uniform choice followed by the selected branch.
pub fn sample<R: Rng + ?Sized>(space: &ParamSpace, rng: &mut R) -> ParamAssignment {
    let mut out = ParamAssignment::new();
    sample_into(space, rng, &mut out);
    out
}

fn sample_into<R: Rng + ?Sized>(space: &ParamSpace, rng: &mut R, out: &mut ParamAssignment) {
    for (name, domain) in space.iter() {
        let value = domain.sample_value(rng);
        if let ParamValue::Label(label) = &value {
            if let Some(option) = domain.option(label) {
                out.insert(name, value.clone());
                sample_into(&option.space, rng, out);
                continue;
            }
        }
        out.insert(name, value);
    }
}

fn knn_space() -> ParamSpace {
    ParamSpace::new()
        .with("k", ParamDomain::IntUniform { low: 10, high: 100 })
        .with("min_k", ParamDomain::IntUniform { low: 1, high: 5 })
        .with(
            "sim",
            ParamDomain::Choice {
                options: vec![
                    ChoiceOption::leaf("cosine"),
                    ChoiceOption::leaf("msd"),
                    ChoiceOption::leaf("pearson"),
                    ChoiceOption::nested(
                        "pearson_baseline",
                        ParamSpace::new().with(
                            "shrinkage",
                            ParamDomain::Uniform {
                                low: 0.0,
                                high: 200.0,
                            },
                        ),
                    ),
                ],
            },
        )
        .with("user_based", ParamDomain::choice(&["true", "false"]))
}

fn svd_space() -> ParamSpace {
    ParamSpace::new()
        .with("n_factors", ParamDomain::IntUniform { low: 2, high: 100 })
        .with("n_epochs", ParamDomain::IntUniform { low: 10, high: 60 })
        .with("lr", ParamDomain::LogUniform { low: 1e-4, high: 1e-1 })
        .with("reg", ParamDomain::LogUniform { low: 1e-4, high: 0.5 })
}

/// The search space explored for each algorithm unless overridden.
pub fn default_space(algo: AlgorithmSpec) -> ParamSpace {
    use AlgorithmSpec::*;
    match algo {
        NormalPredictor | SlopeOne => ParamSpace::new(),
        Svd | SvdPp => svd_space(),
        Nmf => ParamSpace::new()
            .with("n_factors", ParamDomain::IntUniform { low: 5, high: 50 })
            .with("n_epochs", ParamDomain::IntUniform { low: 20, high: 100 })
            .with("reg_pu", ParamDomain::LogUniform { low: 1e-3, high: 0.5 })
            .with("reg_qi", ParamDomain::LogUniform { low: 1e-3, high: 0.5 }),
        KnnBasic | KnnWithMeans | KnnWithZScore | KnnBaseline => knn_space(),
        BaselineOnly => ParamSpace::new().with(
            "method",
            ParamDomain::Choice {
                options: vec![
                    ChoiceOption::nested(
                        "als",
                        ParamSpace::new()
                            .with("epochs", ParamDomain::IntUniform { low: 5, high: 30 })
                            .with("reg_u", ParamDomain::Uniform { low: 1.0, high: 30.0 })
                            .with("reg_i", ParamDomain::Uniform { low: 1.0, high: 25.0 }),
                    ),
                    ChoiceOption::nested(
                        "sgd",
                        ParamSpace::new()
                            .with("lr", ParamDomain::LogUniform { low: 1e-4, high: 1e-1 })
                            .with("reg", ParamDomain::LogUniform { low: 1e-5, high: 0.1 })
                            .with("epochs", ParamDomain::IntUniform { low: 5, high: 50 }),
                    ),
                ],
            },
        ),
        CoClustering => ParamSpace::new()
            .with("n_cltr_u", ParamDomain::IntUniform { low: 2, high: 10 })
            .with("n_cltr_i", ParamDomain::IntUniform { low: 2, high: 10 })
            .with("n_epochs", ParamDomain::IntUniform { low: 10, high: 50 }),
    }
}
