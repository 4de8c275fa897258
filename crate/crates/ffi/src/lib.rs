//! C ABI for hydro-ensemble.
//!
//! Every function returns an [`HeStatus`]. On failure a human-readable
//! message is kept per thread and can be read with
//! [`he_last_error_message`]. Objects are opaque handles created by
//! `*_new`/`*_load` functions and released with the matching `*_free`.
//! Panics never cross the boundary; they are reported as
//! `HE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hydro_ensemble::ensemble::{CombinedPrediction, SchemeId};
use hydro_ensemble::evaluate::{self, IntervalPrediction};
use hydro_ensemble::experiment::runner::{load_catchment, run_single_scheme};
use hydro_ensemble::experiment::ExperimentConfig;
use hydro_ensemble::gr2m::{self, Gr2mParams, Gr2mState};
use hydro_ensemble::timeseries::{MonthlySeries, YearMonth};
use hydro_ensemble::Error;

/// Result codes shared by every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    Numerical = 6,
    NotFound = 7,
    Panic = 99,
}

/// Experiment configuration (periods, probabilities, chain settings).
pub struct HeConfig {
    inner: ExperimentConfig,
}

/// Monthly forcing and streamflow of one catchment.
pub struct HeCatchment {
    id: String,
    series: MonthlySeries,
}

/// Combined quantile prediction over the testing period, with the
/// matching observations.
pub struct HePrediction {
    prediction: CombinedPrediction,
    observed: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> HeStatus {
    match e {
        Error::InvalidArgument(_) => HeStatus::InvalidArgument,
        Error::Config(_) => HeStatus::Config,
        Error::Io { .. } => HeStatus::Io,
        Error::Parse { .. }
        | Error::Csv(_)
        | Error::Json(_)
        | Error::MissingValue { .. }
        | Error::NegativeValue { .. }
        | Error::IncompleteSpan(_) => HeStatus::Parse,
        _ => HeStatus::Numerical,
    }
}

struct Failure(HeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(HeStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(HeStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HeStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            HeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the most recent failure on this thread, or NULL. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn he_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn he_status_string(status: HeStatus) -> *const c_char {
    let s: &'static CStr = match status {
        HeStatus::Ok => c"ok",
        HeStatus::NullPointer => c"null pointer argument",
        HeStatus::InvalidArgument => c"invalid argument",
        HeStatus::Config => c"configuration error",
        HeStatus::Io => c"i/o error",
        HeStatus::Parse => c"parse error",
        HeStatus::Numerical => c"numerical failure",
        HeStatus::NotFound => c"not found",
        HeStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Library version as a NUL-terminated string.
#[no_mangle]
pub extern "C" fn he_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- config

/// Creates a configuration holding the defaults.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn he_config_new(out: *mut *mut HeConfig) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(HeConfig {
            inner: ExperimentConfig::default(),
        }));
        Ok(())
    })
}

/// Reads a `key = value` configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn he_config_load(path: *const c_char, out: *mut *mut HeConfig) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = ExperimentConfig::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(HeConfig { inner }));
        Ok(())
    })
}

/// Sets one configuration key, e.g. `("m", "100")`.
///
/// # Safety
/// `config` must come from this library; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn he_config_set(config: *mut HeConfig, key: *const c_char, value: *const c_char) -> HeStatus {
    guard(|| {
        let cfg = out_arg(config, "config")?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        cfg.inner
            .set(key, value)
            .map_err(|m| Failure(HeStatus::Config, format!("{key}: {m}")))?;
        Ok(())
    })
}

/// Checks the configuration as a whole (cross-key constraints).
///
/// # Safety
/// `config` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn he_config_validate(config: *const HeConfig) -> HeStatus {
    guard(|| {
        ref_arg(config, "config")?.inner.validate()?;
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library or be NULL; it must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn he_config_free(config: *mut HeConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

// ------------------------------------------------------------- catchment

/// Loads a daily catchment CSV and aggregates it to whole years of months.
/// The catchment id is the file stem.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn he_catchment_load(path: *const c_char, out: *mut *mut HeCatchment) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = Path::new(str_arg(path, "path")?);
        let series = load_catchment(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        *out = Box::into_raw(Box::new(HeCatchment { id, series }));
        Ok(())
    })
}

/// Builds a catchment from monthly arrays of length `n` (mm/month) starting
/// at `start_year`/`start_month`.
///
/// # Safety
/// `id` must be NUL-terminated, the three arrays must hold `n` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_catchment_from_monthly(
    id: *const c_char,
    start_year: i32,
    start_month: u32,
    precipitation: *const f64,
    potential_evaporation: *const f64,
    streamflow: *const f64,
    n: usize,
    out: *mut *mut HeCatchment,
) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let id = str_arg(id, "id")?.to_string();
        if !(1..=12).contains(&start_month) {
            return Err(invalid(format!("start_month {start_month} outside 1..=12")));
        }
        let p = slice_arg(precipitation, n, "precipitation")?;
        let e = slice_arg(potential_evaporation, n, "potential_evaporation")?;
        let q = slice_arg(streamflow, n, "streamflow")?;
        let series = MonthlySeries::new(
            YearMonth::new(start_year, start_month),
            p.to_vec(),
            e.to_vec(),
            q.to_vec(),
        )?;
        *out = Box::into_raw(Box::new(HeCatchment { id, series }));
        Ok(())
    })
}

/// Number of months in the catchment record.
///
/// # Safety
/// `catchment` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn he_catchment_months(catchment: *const HeCatchment, out: *mut usize) -> HeStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(catchment, "catchment")?.series.len();
        Ok(())
    })
}

/// # Safety
/// `catchment` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn he_catchment_free(catchment: *mut HeCatchment) {
    if !catchment.is_null() {
        drop(Box::from_raw(catchment));
    }
}

// ------------------------------------------------------------ prediction

/// Runs one scheme (`"basic-linear"`, `"basic-quantile"` or `"1"`..`"6"`)
/// on a catchment. Ensemble schemes calibrate the model first, which can
/// take a while.
///
/// # Safety
/// Handles must come from this library, `scheme` must be NUL-terminated
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn he_run_scheme(
    config: *const HeConfig,
    catchment: *const HeCatchment,
    scheme: *const c_char,
    out: *mut *mut HePrediction,
) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = &ref_arg(config, "config")?.inner;
        let c = ref_arg(catchment, "catchment")?;
        let scheme: SchemeId = str_arg(scheme, "scheme")?.parse()?;
        cfg.validate()?;
        let (output, observed) = run_single_scheme(&c.id, &c.series, cfg, scheme)?;
        *out = Box::into_raw(Box::new(HePrediction {
            prediction: output.prediction,
            observed,
        }));
        Ok(())
    })
}

/// Number of testing months in the prediction.
///
/// # Safety
/// `prediction` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn he_prediction_months(prediction: *const HePrediction, out: *mut usize) -> HeStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(prediction, "prediction")?.prediction.n_test();
        Ok(())
    })
}

/// Number of predicted quantile levels.
///
/// # Safety
/// `prediction` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn he_prediction_levels(prediction: *const HePrediction, out: *mut usize) -> HeStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(prediction, "prediction")?.prediction.probabilities.len();
        Ok(())
    })
}

/// Probability of quantile level `index`.
///
/// # Safety
/// `prediction` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn he_prediction_probability(
    prediction: *const HePrediction,
    index: usize,
    out: *mut f64,
) -> HeStatus {
    guard(|| {
        let pred = &ref_arg(prediction, "prediction")?.prediction;
        let p = pred
            .probabilities
            .get(index)
            .ok_or_else(|| Failure(HeStatus::NotFound, format!("level index {index} out of range")))?;
        *out_arg(out, "out")? = *p;
        Ok(())
    })
}

/// Copies the predicted `p`-quantile series into `buffer`, which must hold
/// exactly as many values as [`he_prediction_months`] reports.
///
/// # Safety
/// `prediction` must come from this library and `buffer` hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn he_prediction_quantile(
    prediction: *const HePrediction,
    p: f64,
    buffer: *mut f64,
    len: usize,
) -> HeStatus {
    guard(|| {
        let pred = &ref_arg(prediction, "prediction")?.prediction;
        let q = pred
            .quantile(p)
            .ok_or_else(|| Failure(HeStatus::NotFound, format!("probability {p} was not predicted")))?;
        if len != q.len() {
            return Err(invalid(format!(
                "buffer holds {len} values, prediction has {}",
                q.len()
            )));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(q);
        Ok(())
    })
}

/// Scores the central `1 - alpha` interval against the testing-period
/// observations. Any of the output pointers may be NULL.
///
/// # Safety
/// `prediction` must come from this library; non-NULL outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn he_prediction_score(
    prediction: *const HePrediction,
    alpha: f64,
    coverage: *mut f64,
    width: *mut f64,
    interval_score: *mut f64,
) -> HeStatus {
    guard(|| {
        let h = ref_arg(prediction, "prediction")?;
        let interval = IntervalPrediction::from_combined(&h.prediction, alpha)?;
        let cp = evaluate::coverage_probability(&interval, &h.observed)?;
        let aw = evaluate::average_width(&interval);
        let ais = evaluate::average_interval_score(&interval, &h.observed)?;
        if let Some(c) = coverage.as_mut() {
            *c = cp;
        }
        if let Some(w) = width.as_mut() {
            *w = aw;
        }
        if let Some(s) = interval_score.as_mut() {
            *s = ais;
        }
        Ok(())
    })
}

/// # Safety
/// `prediction` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn he_prediction_free(prediction: *mut HePrediction) {
    if !prediction.is_null() {
        drop(Box::from_raw(prediction));
    }
}

// ------------------------------------------------------- plain functions

fn interval_from(lower: &[f64], upper: &[f64], alpha: f64) -> Result<IntervalPrediction, Failure> {
    Ok(IntervalPrediction::new(alpha, lower.to_vec(), upper.to_vec())?)
}

/// Average interval score of `n` central `1 - alpha` intervals.
///
/// # Safety
/// The arrays must hold `n` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn he_average_interval_score(
    lower: *const f64,
    upper: *const f64,
    observed: *const f64,
    n: usize,
    alpha: f64,
    out: *mut f64,
) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pred = interval_from(slice_arg(lower, n, "lower")?, slice_arg(upper, n, "upper")?, alpha)?;
        *out = evaluate::average_interval_score(&pred, slice_arg(observed, n, "observed")?)?;
        Ok(())
    })
}

/// Fraction of observations inside the closed intervals.
///
/// # Safety
/// The arrays must hold `n` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn he_coverage_probability(
    lower: *const f64,
    upper: *const f64,
    observed: *const f64,
    n: usize,
    out: *mut f64,
) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pred = interval_from(slice_arg(lower, n, "lower")?, slice_arg(upper, n, "upper")?, 0.5)?;
        *out = evaluate::coverage_probability(&pred, slice_arg(observed, n, "observed")?)?;
        Ok(())
    })
}

/// Mean of `upper - lower`.
///
/// # Safety
/// The arrays must hold `n` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn he_average_width(lower: *const f64, upper: *const f64, n: usize, out: *mut f64) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pred = interval_from(slice_arg(lower, n, "lower")?, slice_arg(upper, n, "upper")?, 0.5)?;
        *out = evaluate::average_width(&pred);
        Ok(())
    })
}

/// Runs the monthly model from its default initial state over `n` months
/// of forcing and writes the simulated streamflow into `flow`.
///
/// # Safety
/// The forcing arrays and `flow` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn he_gr2m_simulate(
    theta1: f64,
    theta2: f64,
    precipitation: *const f64,
    potential_evaporation: *const f64,
    n: usize,
    flow: *mut f64,
) -> HeStatus {
    guard(|| {
        let params = Gr2mParams::new(theta1, theta2)?;
        let p = slice_arg(precipitation, n, "precipitation")?;
        let e = slice_arg(potential_evaporation, n, "potential_evaporation")?;
        let q = gr2m::run(&params, p, e, Gr2mState::initial(&params))?;
        if n > 0 {
            if flow.is_null() {
                return Err(null("flow"));
            }
            std::slice::from_raw_parts_mut(flow, n).copy_from_slice(&q);
        }
        Ok(())
    })
}
