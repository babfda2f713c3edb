//! Run manifests: the JSON documents written by every CLI mode.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{FormatSpec, RatingScale, RatingsTable};
use crate::error::{Error, Result};
use crate::metrics::EvalResult;
use crate::optimize::{Grid, Trial};
use crate::space::ParamAssignment;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDigest {
    pub path: String,
    pub format: FormatSpec,
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    pub scale: RatingScale,
}

impl DatasetDigest {
    pub fn new(path: &str, format: &FormatSpec, table: &RatingsTable) -> Self {
        Self {
            path: path.to_owned(),
            format: format.clone(),
            n_users: table.n_users(),
            n_items: table.n_items(),
            n_ratings: table.n_ratings(),
            scale: table.scale(),
        }
    }
}

/// Everything needed to re-run a command, plus its result. `C` is the
/// resolved configuration and `P` the mode's payload, whose fields are
/// flattened into the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest<C, P> {
    pub command: Vec<String>,
    pub version: String,
    pub config: C,
    pub dataset: DatasetDigest,
    #[serde(flatten)]
    pub payload: P,
}

impl<C: Serialize + DeserializeOwned, P: Serialize + DeserializeOwned> RunManifest<C, P> {
    pub fn new(command: Vec<String>, config: C, dataset: DatasetDigest, payload: P) -> Self {
        Self {
            command,
            version: VERSION.to_owned(),
            config,
            dataset,
            payload,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Resolved settings of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub algorithm: String,
    pub params: ParamAssignment,
    pub cv_folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatePayload {
    pub rmse: EvalResult,
    pub mae: EvalResult,
}

/// Resolved settings of `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub algorithm: String,
    pub metric: crate::metrics::Metric,
    pub grid: Grid,
    pub cv_folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPayload {
    pub best: Trial,
    pub trials: Vec<Trial>,
    pub wall_time_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Preset;
    use crate::orchestrate::{SelectionConfig, SelectionReport, Winner};
    use std::collections::BTreeMap;

    #[test]
    fn selection_manifest_round_trips() {
        let table = RatingsTable::from_triples(
            [("a", "x", 1.0), ("b", "y", 2.5)].map(|(u, i, r)| (u.to_string(), i.to_string(), r)),
            RatingScale::new(1.0, 5.0).unwrap(),
        )
        .unwrap();
        let report = SelectionReport {
            baseline_loss: 1.234_567_890_123_456_7,
            outcomes: BTreeMap::new(),
            winner: Winner {
                algorithm: "SVD".into(),
                assignment: ParamAssignment::new().with("lr", 0.001_234_567_891_234).with("n_factors", 7),
                loss: 0.913_612_345_678_9,
                baseline_fallback: false,
            },
            wall_time: None,
        };
        let m = RunManifest::new(
            vec!["autorec".into(), "auto".into()],
            SelectionConfig::default(),
            DatasetDigest::new("u.data", &Preset::Ml100k.format(), &table),
            report,
        );
        let text = m.to_json().unwrap();
        let keys: Vec<String> = serde_json::from_str::<serde_json::Value>(&text)
            .unwrap()
            .as_object()
            .unwrap()
            .keys()
            .cloned()
            .collect();
        assert_eq!(
            keys,
            ["command", "version", "config", "dataset", "baseline_loss", "outcomes", "winner", "wall_time_s"]
        );
        assert!(text.contains("1.2345678901234567"));
        let back = RunManifest::<SelectionConfig, SelectionReport>::from_json(&text).unwrap();
        assert_eq!(back, m);
    }
}
