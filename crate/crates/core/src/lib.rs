//! Automated algorithm selection and hyperparameter search for rating
//! prediction.
//!
//! Given a table of user/item ratings, [`orchestrate::run_selection`] scores a
//! random-predictor baseline, optimizes every candidate collaborative-filtering
//! algorithm under a shared budget, drops algorithms that cannot beat the
//! baseline, and returns the best algorithm with its tuned hyperparameters
//! alongside a per-algorithm report.
//!
//! The building blocks are usable on their own:
//!
//! - [`dataset`]: delimited-file loading, id maps and k-fold plans
//! - [`algorithms`]: eleven rating predictors and their shared kernels
//! - [`metrics`]: RMSE/MAE and cross-validated evaluation
//! - [`space`]: tree-structured hyperparameter spaces
//! - [`optimize`]: random search, TPE and grid search
//! - [`orchestrate`]: the budgeted, gated selection loop
//! - [`report`]: the serialized run manifest written by the CLI

pub mod algorithms;
pub mod cli;
pub mod dataset;
mod error;
pub mod metrics;
pub mod optimize;
pub mod orchestrate;
pub mod report;
pub mod seed;
pub mod space;

pub use algorithms::{AlgorithmSpec, FittedModel, Prediction};
pub use dataset::{FoldPlan, FormatSpec, RatingScale, RatingsTable};
pub use error::{Error, Result};
pub use metrics::{EvalResult, Metric};
pub use orchestrate::{SelectionConfig, SelectionReport};
pub use space::{ParamAssignment, ParamDomain, ParamSpace, ParamValue};
