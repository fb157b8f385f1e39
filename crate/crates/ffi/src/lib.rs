//! C ABI over the `concentration` library.
//!
//! Objects are opaque handles created from JSON and released with the
//! matching `*_free`. Every call returns a [`ConcStatus`]; on failure the
//! message is available from [`conc_last_error_message`] on the same
//! thread until the next failing call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use concentration::applications::{self, MetricForm};
use concentration::bounds::{self, BoundKind, ProxyProfile};
use concentration::dist::{self, DistributionSpec};
use concentration::functions::{self, FunctionSpec};
use concentration::orlicz::{self, Alpha, GridOptions};
use concentration::verify::{self, Verdict, VerifyConfig};
use concentration::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcStatus {
    Ok = 0,
    InvalidParameter = 1,
    PMaxTooSmall = 2,
    Quadrature = 3,
    Divergent = 4,
    HypothesisNotMet = 5,
    Precondition = 6,
    CapExceeded = 7,
    LengthMismatch = 8,
    Unsupported = 9,
    ExpectationBudget = 10,
    NullPointer = 11,
    InvalidUtf8 = 12,
    InvalidJson = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcBoundKind {
    Thm1 = 0,
    Thm2 = 1,
    Thm3 = 2,
    Thm3Psi2Variant = 3,
    BoundedDifference = 4,
}

impl From<ConcBoundKind> for BoundKind {
    fn from(k: ConcBoundKind) -> Self {
        match k {
            ConcBoundKind::Thm1 => BoundKind::Thm1,
            ConcBoundKind::Thm2 => BoundKind::Thm2,
            ConcBoundKind::Thm3 => BoundKind::Thm3,
            ConcBoundKind::Thm3Psi2Variant => BoundKind::Thm3Psi2Variant,
            ConcBoundKind::BoundedDifference => BoundKind::BoundedDifference,
        }
    }
}

/// Opaque distribution handle.
pub struct ConcDistribution(DistributionSpec);
/// Opaque test-function handle.
pub struct ConcFunction(FunctionSpec);
/// Opaque proxy-profile handle.
pub struct ConcProfile(ProxyProfile);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ConcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter { .. } => ConcStatus::InvalidParameter,
            Error::PMaxTooSmall { .. } => ConcStatus::PMaxTooSmall,
            Error::Quadrature(_) => ConcStatus::Quadrature,
            Error::Divergent(_) => ConcStatus::Divergent,
            Error::HypothesisNotMet(_) => ConcStatus::HypothesisNotMet,
            Error::Precondition(_) => ConcStatus::Precondition,
            Error::CapExceeded { .. } => ConcStatus::CapExceeded,
            Error::LengthMismatch { .. } => ConcStatus::LengthMismatch,
            Error::Unsupported(_) => ConcStatus::Unsupported,
            Error::ExpectationBudget { .. } => ConcStatus::ExpectationBudget,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> ConcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ConcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ConcStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(ConcStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(ConcStatus::InvalidUtf8, format!("`{name}`: {e}")))
}

fn json_error(what: &'static str) -> impl Fn(serde_json::Error) -> Failure {
    move |e| Failure(ConcStatus::InvalidJson, format!("{what}: {e}"))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

fn opt_p(p: f64) -> Option<f64> {
    (!p.is_nan()).then_some(p)
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn conc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn conc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_distribution_from_json(json: *const c_char, out: *mut *mut ConcDistribution) -> ConcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec: DistributionSpec = serde_json::from_str(read_str(json, "json")?).map_err(json_error("distribution"))?;
        spec.validate()?;
        *out = Box::into_raw(Box::new(ConcDistribution(spec)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`conc_distribution_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn conc_distribution_free(h: *mut ConcDistribution) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// ψ_α norm (`alpha` 1 or 2) on the default moment grid.
///
/// # Safety
/// `h` must be a live handle; `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_distribution_psi_norm(h: *const ConcDistribution, alpha: u8, value: *mut f64) -> ConcStatus {
    guard(|| {
        let d = handle(h, "h")?;
        let value = out_ref(value, "value")?;
        *value = orlicz::psi_norm(&d.0, Alpha::try_from(alpha)?, GridOptions::default())?.value;
        Ok(())
    })
}

/// Fill `out[0..count]` with draws.
///
/// # Safety
/// `h` must be a live handle; `out` must hold `count` doubles.
#[no_mangle]
pub unsafe extern "C" fn conc_distribution_sample(h: *const ConcDistribution, seed: u64, count: usize, out: *mut f64) -> ConcStatus {
    guard(|| {
        let d = handle(h, "h")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let xs = dist::sample(&d.0, seed, count)?;
        std::slice::from_raw_parts_mut(out, count).copy_from_slice(&xs);
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_function_from_json(json: *const c_char, out: *mut *mut ConcFunction) -> ConcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec: FunctionSpec = serde_json::from_str(read_str(json, "json")?).map_err(json_error("function"))?;
        spec.validate()?;
        *out = Box::into_raw(Box::new(ConcFunction(spec)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`conc_function_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn conc_function_free(h: *mut ConcFunction) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Analytic proxy profile of a function, as a new profile handle.
///
/// # Safety
/// `h` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_function_profile(h: *const ConcFunction, out: *mut *mut ConcProfile) -> ConcStatus {
    guard(|| {
        let f = handle(h, "h")?;
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(ConcProfile(functions::proxy_profile(&f.0)?)));
        Ok(())
    })
}

/// Fill `out[0..count]` with draws of `f(X)`.
///
/// # Safety
/// `h` must be a live handle; `out` must hold `count` doubles.
#[no_mangle]
pub unsafe extern "C" fn conc_function_sample(h: *const ConcFunction, seed: u64, count: usize, out: *mut f64) -> ConcStatus {
    guard(|| {
        let f = handle(h, "h")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let xs = functions::sample_f(&f.0, seed, count)?;
        std::slice::from_raw_parts_mut(out, count).copy_from_slice(&xs);
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_profile_from_json(json: *const c_char, out: *mut *mut ConcProfile) -> ConcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let profile: ProxyProfile = serde_json::from_str(read_str(json, "json")?).map_err(json_error("profile"))?;
        profile.validate()?;
        *out = Box::into_raw(Box::new(ConcProfile(profile)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from a profile constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn conc_profile_free(h: *mut ConcProfile) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Tail bound at `t`. Pass NaN for `p` when the kind needs none.
///
/// # Safety
/// `h` must be a live handle; `prob` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_tail(h: *const ConcProfile, kind: ConcBoundKind, p: f64, t: f64, prob: *mut f64) -> ConcStatus {
    guard(|| {
        let profile = handle(h, "h")?;
        let prob = out_ref(prob, "prob")?;
        *prob = bounds::tail(kind.into(), &profile.0, opt_p(p), t)?.prob;
        Ok(())
    })
}

/// Deviation at confidence `1 − δ`: exact root and additive relaxation.
///
/// # Safety
/// `h` must be a live handle; `exact` and `additive` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn conc_invert(
    h: *const ConcProfile,
    kind: ConcBoundKind,
    p: f64,
    delta: f64,
    exact: *mut f64,
    additive: *mut f64,
) -> ConcStatus {
    guard(|| {
        let profile = handle(h, "h")?;
        let exact = out_ref(exact, "exact")?;
        let additive = out_ref(additive, "additive")?;
        let inv = bounds::invert_tail(kind.into(), &profile.0, opt_p(p), delta)?;
        *exact = inv.exact;
        *additive = inv.additive;
        Ok(())
    })
}

/// Metric-space tail with ψ₁-diameters; `proof_consistent` selects the `L·Δ` form.
///
/// # Safety
/// `diameters` must hold `len` doubles; `prob` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_metric_tail(
    lipschitz: f64,
    diameters: *const f64,
    len: usize,
    t: f64,
    proof_consistent: bool,
    prob: *mut f64,
) -> ConcStatus {
    guard(|| {
        if diameters.is_null() {
            return Err(null("diameters"));
        }
        let prob = out_ref(prob, "prob")?;
        let form = if proof_consistent { MetricForm::ProofConsistent } else { MetricForm::Statement };
        *prob = applications::metric_tail(lipschitz, std::slice::from_raw_parts(diameters, len), t, form)?.prob;
        Ok(())
    })
}

/// # Safety
/// `psi1` must hold `len` doubles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_vector_bound_i(psi1: *const f64, len: usize, delta: f64, out: *mut f64) -> ConcStatus {
    guard(|| {
        if psi1.is_null() {
            return Err(null("psi1"));
        }
        *out_ref(out, "out")? = applications::vector_bound_i(std::slice::from_raw_parts(psi1, len), delta)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_vector_bound_ii(psi1: f64, n: usize, delta: f64, out: *mut f64) -> ConcStatus {
    guard(|| {
        *out_ref(out, "out")? = applications::vector_bound_ii(psi1, n, delta)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_vector_bound_iii(l2p: f64, psi1: f64, p: f64, n: usize, delta: f64, out: *mut f64) -> ConcStatus {
    guard(|| {
        *out_ref(out, "out")? = applications::vector_bound_iii(l2p, psi1, p, n, delta)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_psa_bound(psi2: f64, d: usize, n: usize, delta: f64, out: *mut f64) -> ConcStatus {
    guard(|| {
        *out_ref(out, "out")? = applications::psa_bound(psi2, d, n, delta)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_rademacher_bound(rad: f64, lipschitz: f64, psi1: f64, n: usize, delta: f64, out: *mut f64) -> ConcStatus {
    guard(|| {
        *out_ref(out, "out")? = applications::rademacher_generalization_bound(rad, lipschitz, psi1, n, delta)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conc_regression_bound(lipschitz: f64, psi1_x: f64, psi1_z: f64, n: usize, delta: f64, out: *mut f64) -> ConcStatus {
    guard(|| {
        *out_ref(out, "out")? = applications::regression_bound(lipschitz, psi1_x, psi1_z, n, delta)?;
        Ok(())
    })
}

/// Run a verification from a JSON config. `threads = 0` uses all cores.
/// `report_json` receives a string to release with [`conc_string_free`];
/// `violation` is set to 1 when any bound is violated, else 0.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn conc_verify(
    config_json: *const c_char,
    threads: usize,
    report_json: *mut *mut c_char,
    violation: *mut i32,
) -> ConcStatus {
    guard(|| {
        let report_json = out_ref(report_json, "report_json")?;
        let violation = out_ref(violation, "violation")?;
        let cfg: VerifyConfig = serde_json::from_str(read_str(config_json, "config_json")?).map_err(json_error("verify config"))?;
        let report = verify::run_verification(&cfg, (threads > 0).then_some(threads))?;
        *violation = i32::from(report.verdict == Verdict::Violation);
        *report_json = CString::new(report.to_json()).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn conc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
