//! C ABI for lungref.
//!
//! Fitted models are loaded from their JSON model files into opaque
//! handles. Every fallible function returns a [`LungrefStatus`] and writes
//! its result through an out-pointer; on failure the out-pointer is left
//! untouched and a message is available from
//! [`lungref_last_error_message`] on the same thread. Missing weight is
//! passed as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lungref::data::Covariates;
use lungref::distributions::{normal_cdf, normal_quantile, BccgParams};
use lungref::gamlss::{predict_params, FittedGamlssModel};
use lungref::pipeline::io::{GamlssModelFile, SlrModelFile};
use lungref::slr::{slr_lln, slr_predict, slr_zscore, FittedSlrModel};
use lungref::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LungrefStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed input: bad JSON, unreadable file, invalid argument.
    Input = 3,
    /// Argument outside the mathematical domain.
    Domain = 4,
    /// Requested centile lies outside the distribution's support.
    OutOfSupport = 5,
    /// Singular or degenerate computation.
    Numerical = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Opaque fitted GAMLSS model.
pub struct LungrefGamlssModel {
    model: FittedGamlssModel,
}

/// Opaque fitted segmented-regression model.
pub struct LungrefSlrModel {
    model: FittedSlrModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> LungrefStatus {
    match e {
        Error::Input(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Dimension(_) => LungrefStatus::Input,
        Error::Domain(_) => LungrefStatus::Domain,
        Error::OutOfSupport { .. } => LungrefStatus::OutOfSupport,
        Error::Singular(_) | Error::Degenerate(_) | Error::Unattainable(_) => LungrefStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (LungrefStatus, String)>>(f: F) -> LungrefStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LungrefStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LungrefStatus::Panic
        }
    }
}

fn lib(e: Error) -> (LungrefStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (LungrefStatus, String) {
    (LungrefStatus::NullPointer, format!("{name} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (LungrefStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LungrefStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), (LungrefStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn covariates(age: f64, height: f64, weight: f64) -> Covariates {
    Covariates {
        age,
        height,
        weight: if weight.is_nan() { None } else { Some(weight) },
    }
}

fn params(mu: f64, sigma: f64, nu: f64) -> Result<BccgParams, (LungrefStatus, String)> {
    BccgParams::new(mu, sigma, nu).map_err(lib)
}

fn parse_gamlss(text: &str) -> Result<FittedGamlssModel, (LungrefStatus, String)> {
    if let Ok(file) = serde_json::from_str::<GamlssModelFile>(text) {
        return Ok(file.model);
    }
    serde_json::from_str::<FittedGamlssModel>(text)
        .map_err(|e| (LungrefStatus::Input, format!("not a GAMLSS model: {e}")))
}

fn parse_slr(text: &str) -> Result<FittedSlrModel, (LungrefStatus, String)> {
    if let Ok(file) = serde_json::from_str::<SlrModelFile>(text) {
        return Ok(file.model);
    }
    serde_json::from_str::<FittedSlrModel>(text).map_err(|e| (LungrefStatus::Input, format!("not an SLR model: {e}")))
}

fn read_file(path: &str) -> Result<String, (LungrefStatus, String)> {
    std::fs::read_to_string(Path::new(path)).map_err(|e| (LungrefStatus::Input, format!("cannot read {path}: {e}")))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lungref_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lungref_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Standard normal CDF.
#[no_mangle]
pub extern "C" fn lungref_normal_cdf(z: f64) -> f64 {
    normal_cdf(z)
}

/// Standard normal quantile; `prob` must lie in (0, 1).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lungref_normal_quantile(prob: f64, out: *mut f64) -> LungrefStatus {
    guard(|| write(out, normal_quantile(prob).map_err(lib)?, "out"))
}

/// BCCG z-score of `y`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lungref_bccg_zscore(y: f64, mu: f64, sigma: f64, nu: f64, out: *mut f64) -> LungrefStatus {
    guard(|| write(out, params(mu, sigma, nu)?.zscore(y).map_err(lib)?, "out"))
}

/// BCCG quantile at probability `prob`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lungref_bccg_quantile(prob: f64, mu: f64, sigma: f64, nu: f64, out: *mut f64) -> LungrefStatus {
    guard(|| write(out, params(mu, sigma, nu)?.quantile(prob).map_err(lib)?, "out"))
}

/// BCCG CDF at `y`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lungref_bccg_cdf(y: f64, mu: f64, sigma: f64, nu: f64, out: *mut f64) -> LungrefStatus {
    guard(|| write(out, params(mu, sigma, nu)?.cdf(y).map_err(lib)?, "out"))
}

/// BCCG log density at `y`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lungref_bccg_logpdf(y: f64, mu: f64, sigma: f64, nu: f64, out: *mut f64) -> LungrefStatus {
    guard(|| write(out, params(mu, sigma, nu)?.logpdf(y).map_err(lib)?, "out"))
}

/// Loads a GAMLSS model from JSON text (a model file or a bare model).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
/// Release the handle with [`lungref_gamlss_free`].
#[no_mangle]
pub unsafe extern "C" fn lungref_gamlss_from_json(json: *const c_char, out: *mut *mut LungrefGamlssModel) -> LungrefStatus {
    guard(|| {
        let model = parse_gamlss(str_arg(json, "json")?)?;
        write(out, Box::into_raw(Box::new(LungrefGamlssModel { model })), "out")
    })
}

/// Loads a GAMLSS model file from `path`.
///
/// # Safety
/// As [`lungref_gamlss_from_json`], with `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lungref_gamlss_load(path: *const c_char, out: *mut *mut LungrefGamlssModel) -> LungrefStatus {
    guard(|| {
        let model = parse_gamlss(&read_file(str_arg(path, "path")?)?)?;
        write(out, Box::into_raw(Box::new(LungrefGamlssModel { model })), "out")
    })
}

/// Releases a GAMLSS handle. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lungref_gamlss_free(model: *mut LungrefGamlssModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn gamlss_ref<'a>(m: *const LungrefGamlssModel) -> Result<&'a FittedGamlssModel, (LungrefStatus, String)> {
    m.as_ref().map(|h| &h.model).ok_or_else(|| null("model"))
}

/// Predicted mu, sigma and nu for one subject.
///
/// # Safety
/// `model` must be a live handle; the out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lungref_gamlss_predict(
    model: *const LungrefGamlssModel,
    age: f64,
    height: f64,
    weight: f64,
    mu: *mut f64,
    sigma: *mut f64,
    nu: *mut f64,
) -> LungrefStatus {
    guard(|| {
        if mu.is_null() || sigma.is_null() || nu.is_null() {
            return Err(null("output"));
        }
        let p = predict_params(gamlss_ref(model)?, &covariates(age, height, weight)).map_err(lib)?;
        write(mu, p.mu, "mu")?;
        write(sigma, p.sigma, "sigma")?;
        write(nu, p.nu, "nu")
    })
}

/// z-score of measurement `y` for one subject.
///
/// # Safety
/// As [`lungref_gamlss_predict`].
#[no_mangle]
pub unsafe extern "C" fn lungref_gamlss_zscore(
    model: *const LungrefGamlssModel,
    age: f64,
    height: f64,
    weight: f64,
    y: f64,
    out: *mut f64,
) -> LungrefStatus {
    guard(|| {
        let p = predict_params(gamlss_ref(model)?, &covariates(age, height, weight)).map_err(lib)?;
        write(out, p.zscore(y).map_err(lib)?, "out")
    })
}

/// Centile at `level` (e.g. 0.05 for the lower limit of normal).
///
/// # Safety
/// As [`lungref_gamlss_predict`].
#[no_mangle]
pub unsafe extern "C" fn lungref_gamlss_lln(
    model: *const LungrefGamlssModel,
    age: f64,
    height: f64,
    weight: f64,
    level: f64,
    out: *mut f64,
) -> LungrefStatus {
    guard(|| {
        let p = predict_params(gamlss_ref(model)?, &covariates(age, height, weight)).map_err(lib)?;
        write(out, p.quantile(level).map_err(lib)?, "out")
    })
}

/// Loads a segmented-regression model from JSON text.
///
/// # Safety
/// As [`lungref_gamlss_from_json`]; release with [`lungref_slr_free`].
#[no_mangle]
pub unsafe extern "C" fn lungref_slr_from_json(json: *const c_char, out: *mut *mut LungrefSlrModel) -> LungrefStatus {
    guard(|| {
        let model = parse_slr(str_arg(json, "json")?)?;
        write(out, Box::into_raw(Box::new(LungrefSlrModel { model })), "out")
    })
}

/// Loads a segmented-regression model file from `path`.
///
/// # Safety
/// As [`lungref_gamlss_load`].
#[no_mangle]
pub unsafe extern "C" fn lungref_slr_load(path: *const c_char, out: *mut *mut LungrefSlrModel) -> LungrefStatus {
    guard(|| {
        let model = parse_slr(&read_file(str_arg(path, "path")?)?)?;
        write(out, Box::into_raw(Box::new(LungrefSlrModel { model })), "out")
    })
}

/// Releases a segmented-regression handle. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lungref_slr_free(model: *mut LungrefSlrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn slr_ref<'a>(m: *const LungrefSlrModel) -> Result<&'a FittedSlrModel, (LungrefStatus, String)> {
    m.as_ref().map(|h| &h.model).ok_or_else(|| null("model"))
}

/// Predicted mean and residual SD for one subject.
///
/// # Safety
/// `model` must be a live handle; the out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lungref_slr_predict(
    model: *const LungrefSlrModel,
    age: f64,
    height: f64,
    weight: f64,
    mean: *mut f64,
    sd: *mut f64,
) -> LungrefStatus {
    guard(|| {
        if mean.is_null() || sd.is_null() {
            return Err(null("output"));
        }
        let m = slr_ref(model)?;
        let c = covariates(age, height, weight);
        write(mean, slr_predict(m, &c).map_err(lib)?, "mean")?;
        write(sd, m.sd_at(age), "sd")
    })
}

/// z-score of measurement `y` for one subject.
///
/// # Safety
/// As [`lungref_slr_predict`].
#[no_mangle]
pub unsafe extern "C" fn lungref_slr_zscore(
    model: *const LungrefSlrModel,
    age: f64,
    height: f64,
    weight: f64,
    y: f64,
    out: *mut f64,
) -> LungrefStatus {
    guard(|| {
        let z = slr_zscore(y, slr_ref(model)?, &covariates(age, height, weight)).map_err(lib)?;
        write(out, z, "out")
    })
}

/// Normal-theory centile at `level`.
///
/// # Safety
/// As [`lungref_slr_predict`].
#[no_mangle]
pub unsafe extern "C" fn lungref_slr_lln(
    model: *const LungrefSlrModel,
    age: f64,
    height: f64,
    weight: f64,
    level: f64,
    out: *mut f64,
) -> LungrefStatus {
    guard(|| {
        let v = slr_lln(slr_ref(model)?, &covariates(age, height, weight), level).map_err(lib)?;
        write(out, v, "out")
    })
}
