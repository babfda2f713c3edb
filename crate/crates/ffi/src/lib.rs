//! C ABI over the `autorec` engine.
//!
//! Conventions:
//! - every fallible function returns an [`AutorecStatus`] and writes results
//!   through out-pointers, which are left untouched on failure;
//! - on failure, [`autorec_last_error`] describes the problem for the
//!   calling thread;
//! - handles are opaque, created by `*_load`/`*_fit` and released by the
//!   matching `*_free`; freeing NULL is a no-op;
//! - strings going in are NUL-terminated UTF-8; strings coming out are owned
//!   by the caller and released with [`autorec_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use autorec::dataset::{self, Preset};
use autorec::metrics::{cross_validate_metrics, Metric};
use autorec::{algorithms, orchestrate, AlgorithmSpec, Error, FittedModel, ParamAssignment, RatingsTable};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutorecStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The dataset file could not be read.
    Io = 3,
    /// The dataset could not be parsed or was empty.
    Parse = 4,
    /// Malformed options, parameters or JSON.
    InvalidArgument = 5,
    UnknownAlgorithm = 6,
    /// Training or selection failed.
    Failed = 7,
    /// A panic was caught at the boundary.
    Panic = 8,
}

/// A loaded ratings table.
pub struct AutorecDataset {
    table: Arc<RatingsTable>,
}

/// A model fitted on a whole dataset. Keeps the dataset's id maps alive.
pub struct AutorecModel {
    model: FittedModel,
    table: Arc<RatingsTable>,
}

struct Failure(AutorecStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn status_of(e: &Error) -> AutorecStatus {
    match e {
        Error::Io { .. } => AutorecStatus::Io,
        Error::EmptyDataset | Error::Parse { .. } | Error::ScaleViolation { .. } => AutorecStatus::Parse,
        Error::InvalidArgument(_) | Error::InvalidParam { .. } | Error::Json(_) => AutorecStatus::InvalidArgument,
        Error::UnknownAlgorithm(_) => AutorecStatus::UnknownAlgorithm,
        Error::Fold { source, .. } => status_of(source),
        _ => AutorecStatus::Failed,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AutorecStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AutorecStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            AutorecStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AutorecStatus::NullPointer, format!("`{what}` is NULL"))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure(AutorecStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    opt_text(p, what)?.ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn live_dataset<'a>(p: *const AutorecDataset) -> Result<&'a AutorecDataset, Failure> {
    p.as_ref().ok_or_else(|| null("dataset"))
}

fn parse_algo(name: &str) -> Result<AlgorithmSpec, Failure> {
    Ok(name.parse::<AlgorithmSpec>()?)
}

fn parse_params(json: Option<&str>) -> Result<ParamAssignment, Failure> {
    match json {
        None => Ok(ParamAssignment::new()),
        Some(s) => Ok(serde_json::from_str(s).map_err(Error::from)?),
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(AutorecStatus::Failed, "output contains a NUL byte".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn autorec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or "" if it succeeded.
/// The pointer stays valid until the next call into the library on this
/// thread.
#[no_mangle]
pub extern "C" fn autorec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a ratings file laid out as `preset` ("ml100k", "jester",
/// "bookcrossing"); NULL selects "ml100k".
///
/// # Safety
/// `path` and `preset` must be NULL or NUL-terminated strings; `out` must be
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn autorec_dataset_load(
    path: *const c_char,
    preset: *const c_char,
    out_dataset: *mut *mut AutorecDataset,
) -> AutorecStatus {
    guard(|| {
        let path = text(path, "path")?;
        let preset: Preset = opt_text(preset, "preset")?.unwrap_or("ml100k").parse()?;
        let out_dataset = out(out_dataset, "out_dataset")?;
        let table = dataset::load_ratings(path, &preset.format())?;
        *out_dataset = Box::into_raw(Box::new(AutorecDataset { table: Arc::new(table) }));
        Ok(())
    })
}

/// Parses ratings from an in-memory buffer with an explicit layout.
/// `sep` is a literal separator, "tab" or "whitespace"; `columns` lists the
/// field roles, e.g. "user,item,rating,timestamp"; `scale` is "min,max".
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `out` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn autorec_dataset_parse(
    data: *const c_char,
    sep: *const c_char,
    columns: *const c_char,
    scale: *const c_char,
    header: bool,
    out_dataset: *mut *mut AutorecDataset,
) -> AutorecStatus {
    guard(|| {
        let data = text(data, "data")?;
        let columns = text(columns, "columns")?
            .split(',')
            .map(str::parse)
            .collect::<autorec::Result<Vec<dataset::Column>>>()?;
        let format = autorec::FormatSpec::new(
            text(sep, "sep")?.parse()?,
            columns,
            header,
            text(scale, "scale")?.parse()?,
        )?;
        let out_dataset = out(out_dataset, "out_dataset")?;
        let table = RatingsTable::parse(data, &format)?;
        *out_dataset = Box::into_raw(Box::new(AutorecDataset { table: Arc::new(table) }));
        Ok(())
    })
}

/// Writes the number of distinct users, items and ratings. Any out-pointer
/// may be NULL.
///
/// # Safety
/// `dataset` must come from a load function and not be freed.
#[no_mangle]
pub unsafe extern "C" fn autorec_dataset_counts(
    dataset: *const AutorecDataset,
    out_users: *mut usize,
    out_items: *mut usize,
    out_ratings: *mut usize,
) -> AutorecStatus {
    guard(|| {
        let t = &live_dataset(dataset)?.table;
        for (p, v) in [(out_users, t.n_users()), (out_items, t.n_items()), (out_ratings, t.n_ratings())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `dataset` must be NULL or come from a load function, and is invalid
/// afterwards. Models fitted on it stay usable.
#[no_mangle]
pub unsafe extern "C" fn autorec_dataset_free(dataset: *mut AutorecDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Cross-validates `algorithm` with `params_json` (an object of
/// hyperparameters, NULL for defaults) over `cv_folds` folds and writes mean
/// RMSE and MAE. Either out-pointer may be NULL.
///
/// # Safety
/// `dataset` must be live; strings NUL-terminated or NULL where allowed.
#[no_mangle]
pub unsafe extern "C" fn autorec_evaluate(
    dataset: *const AutorecDataset,
    algorithm: *const c_char,
    params_json: *const c_char,
    cv_folds: usize,
    seed: u64,
    out_rmse: *mut f64,
    out_mae: *mut f64,
) -> AutorecStatus {
    guard(|| {
        let table = &live_dataset(dataset)?.table;
        let algo = parse_algo(text(algorithm, "algorithm")?)?;
        let params = parse_params(opt_text(params_json, "params_json")?)?;
        let folds = dataset::kfold_split(table, cv_folds, seed)?;
        let r = cross_validate_metrics(algo, &params, table, &folds, &[Metric::Rmse, Metric::Mae], seed)?;
        if let Some(p) = out_rmse.as_mut() {
            *p = r[0].mean_loss;
        }
        if let Some(p) = out_mae.as_mut() {
            *p = r[1].mean_loss;
        }
        Ok(())
    })
}

/// Fits `algorithm` on the whole dataset.
///
/// # Safety
/// `dataset` must be live; `out_model` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn autorec_model_fit(
    dataset: *const AutorecDataset,
    algorithm: *const c_char,
    params_json: *const c_char,
    seed: u64,
    out_model: *mut *mut AutorecModel,
) -> AutorecStatus {
    guard(|| {
        let table = Arc::clone(&live_dataset(dataset)?.table);
        let algo = parse_algo(text(algorithm, "algorithm")?)?;
        let params = parse_params(opt_text(params_json, "params_json")?)?;
        let out_model = out(out_model, "out_model")?;
        let train = algorithms::Trainset::from_table(&table);
        let model = algorithms::fit(algo, &params, &train, seed)?;
        *out_model = Box::into_raw(Box::new(AutorecModel { model, table }));
        Ok(())
    })
}

/// Predicts the rating of `item` by `user` (raw ids as in the file). Unknown
/// ids still get a finite in-scale score, flagged through
/// `out_impossible`, which may be NULL.
///
/// # Safety
/// `model` must be live; ids NUL-terminated; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn autorec_model_predict(
    model: *const AutorecModel,
    user: *const c_char,
    item: *const c_char,
    out_value: *mut f64,
    out_impossible: *mut bool,
) -> AutorecStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let p = m.model.score_raw(&m.table, text(user, "user")?, text(item, "item")?);
        *out(out_value, "out_value")? = p.value;
        if let Some(f) = out_impossible.as_mut() {
            *f = p.was_impossible;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or come from [`autorec_model_fit`].
#[no_mangle]
pub unsafe extern "C" fn autorec_model_free(model: *mut AutorecModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs automated selection and writes the report as a JSON string.
/// `config_json` is an object overriding fields of the default selection
/// config (e.g. `{"max_evals_per_algorithm": 5, "time_budget": null}`); NULL
/// keeps every default.
///
/// # Safety
/// `dataset` must be live; `out_report_json` writable. The string must be
/// released with [`autorec_string_free`].
#[no_mangle]
pub unsafe extern "C" fn autorec_select(
    dataset: *const AutorecDataset,
    config_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> AutorecStatus {
    guard(|| {
        let table = &live_dataset(dataset)?.table;
        let mut config = serde_json::to_value(orchestrate::SelectionConfig::default()).map_err(Error::from)?;
        if let Some(text) = opt_text(config_json, "config_json")? {
            let patch: serde_json::Value = serde_json::from_str(text).map_err(Error::from)?;
            let patch = patch
                .as_object()
                .ok_or_else(|| Failure(AutorecStatus::InvalidArgument, "config must be a JSON object".into()))?;
            for (k, v) in patch {
                config[k] = v.clone();
            }
        }
        let config: orchestrate::SelectionConfig = serde_json::from_value(config).map_err(Error::from)?;
        let out_report_json = out(out_report_json, "out_report_json")?;
        let report = orchestrate::run_selection(&config, table, |_| {})?;
        let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        *out_report_json = into_c_string(json)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn autorec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
