//! C ABI over `penaltyselect`.
//!
//! Instances live behind an opaque `PsInstance` handle. Every call returns a
//! `PsStatus`; on failure the message is kept per thread and read with
//! `ps_last_error_message`. Strings handed out by this library must be
//! released with `ps_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use penaltyselect::metrics::{gamma_bound, Metric};
use penaltyselect::model::{validate, Instance};
use penaltyselect::solvers::{
    brute_force_mcis, brute_force_mpis, certify_mcis, certify_mpis, greedy_mcis, greedy_mpis,
    McisProblem, MpisProblem, Solution, BRUTE_FORCE_LIMIT,
};
use penaltyselect::Error;

/// Result code of every exported call; zero means success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidInstance = 4,
    InvalidArgument = 5,
    Infeasible = 6,
    TooLarge = 7,
    Internal = 8,
}

/// Objective family: worst single penalty or summed penalty.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsMetric {
    MaxPenalty = 0,
    TotalPenalty = 1,
}

impl From<PsMetric> for Metric {
    fn from(m: PsMetric) -> Self {
        match m {
            PsMetric::MaxPenalty => Metric::MaxPenalty,
            PsMetric::TotalPenalty => Metric::TotalPenalty,
        }
    }
}

/// Opaque validated instance.
pub struct PsInstance {
    inner: Instance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    // interior NULs cannot cross the boundary
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PsStatus, msg: impl Into<String>) -> PsStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::Json(_) | Error::Csv(_) | Error::Io(_) => PsStatus::Parse,
        Error::InvalidInstance(_) => PsStatus::InvalidInstance,
        Error::Infeasible { .. } => PsStatus::Infeasible,
        Error::TooLarge { .. } => PsStatus::TooLarge,
        _ => PsStatus::InvalidArgument,
    }
}

fn from_err(err: Error) -> PsStatus {
    let s = status_of(&err);
    fail(s, err.to_string())
}

/// Runs `f`, turning panics into `Internal` so none unwind into C.
fn guard(f: impl FnOnce() -> PsStatus) -> PsStatus {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == PsStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(PsStatus::Internal, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, PsStatus> {
    if p.is_null() {
        return Err(fail(PsStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PsStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> PsStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            PsStatus::Ok
        }
        Err(_) => fail(PsStatus::Internal, "output contains NUL"),
    }
}

/// Parses an instance from JSON and validates it.
///
/// On success `*out` owns a handle to release with `ps_instance_free`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_instance_from_json(
    json: *const c_char,
    out: *mut *mut PsInstance,
) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return fail(PsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let inst = match Instance::from_json_str(text).and_then(|i| i.ensure_valid().map(|_| i)) {
            Ok(i) => i,
            Err(e) => return from_err(e),
        };
        *out = Box::into_raw(Box::new(PsInstance { inner: inst }));
        PsStatus::Ok
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `inst` must come from `ps_instance_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ps_instance_free(inst: *mut PsInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of hypotheses, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_instance_hypotheses(inst: *const PsInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.m())
}

/// Number of sources, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_instance_sources(inst: *const PsInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.n())
}

/// Validates a JSON instance without keeping it.
///
/// `*violations_json` receives a JSON array of `{code, message}` objects,
/// empty when the instance is valid.
///
/// # Safety
/// `json` must be a NUL-terminated string and `violations_json` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_validate_json(
    json: *const c_char,
    violations_json: *mut *mut c_char,
) -> PsStatus {
    guard(|| {
        if violations_json.is_null() {
            return fail(PsStatus::NullPointer, "null output pointer");
        }
        *violations_json = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let inst = match Instance::from_json_str(text) {
            Ok(i) => i,
            Err(e) => return from_err(e),
        };
        let v = validate(&inst);
        write_string(
            violations_json,
            serde_json::to_string(&v).expect("violations serialize"),
        )
    })
}

/// Lower bound on the submodularity ratio of the max-penalty scores.
///
/// # Safety
/// `inst` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_gamma_bound(inst: *const PsInstance, out: *mut f64) -> PsStatus {
    guard(|| match (inst.as_ref(), out.is_null()) {
        (Some(i), false) => {
            *out = gamma_bound(i.inner.penalties()).gamma;
            PsStatus::Ok
        }
        _ => fail(PsStatus::NullPointer, "null argument"),
    })
}

unsafe fn solve(
    inst: *const PsInstance,
    out: *mut *mut c_char,
    f: impl FnOnce(&Instance) -> penaltyselect::Result<Solution>,
) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return fail(PsStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(i) = inst.as_ref() else {
            return fail(PsStatus::NullPointer, "null instance");
        };
        match f(&i.inner) {
            Ok(s) => write_string(out, s.to_json()),
            Err(e) => from_err(e),
        }
    })
}

unsafe fn bounds_slice<'a>(bounds: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if bounds.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(bounds, len))
    }
}

/// Minimum-cost selection meeting per-hypothesis penalty bounds.
///
/// `brute_force` nonzero requests the exact optimum. The greedy result
/// carries a certificate when the source count allows exhaustive checking.
/// `*solution_json` receives the solution document.
///
/// # Safety
/// `inst` must be a live handle, `bounds` must point to `len` doubles and
/// `solution_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_solve_mcis(
    inst: *const PsInstance,
    bounds: *const f64,
    len: usize,
    metric: PsMetric,
    brute_force: i32,
    solution_json: *mut *mut c_char,
) -> PsStatus {
    let Some(b) = bounds_slice(bounds, len) else {
        return fail(PsStatus::NullPointer, "null bounds");
    };
    solve(inst, solution_json, |i| {
        let p = McisProblem::new(i, b.to_vec(), metric.into())?;
        if brute_force != 0 {
            return brute_force_mcis(&p);
        }
        let mut s = greedy_mcis(&p)?;
        if i.n() <= BRUTE_FORCE_LIMIT {
            certify_mcis(&p, &mut s)?;
        }
        Ok(s)
    })
}

/// Maximum-utility selection within `budget`.
///
/// # Safety
/// `inst` must be a live handle and `solution_json` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_solve_mpis(
    inst: *const PsInstance,
    budget: f64,
    metric: PsMetric,
    brute_force: i32,
    solution_json: *mut *mut c_char,
) -> PsStatus {
    solve(inst, solution_json, |i| {
        let p = MpisProblem::new(i, budget, metric.into())?;
        if brute_force != 0 {
            return brute_force_mpis(&p);
        }
        let mut s = greedy_mpis(&p)?;
        if i.n() <= BRUTE_FORCE_LIMIT {
            certify_mpis(&p, &mut s)?;
        }
        Ok(s)
    })
}

/// Message of the last failure on this thread, or null after a success.
///
/// The pointer stays valid until the next call on the same thread; do not
/// free it.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_distinct_codes() {
        assert_eq!(
            status_of(&Error::Infeasible {
                hypotheses: vec![0]
            }),
            PsStatus::Infeasible
        );
        assert_eq!(
            status_of(&Error::TooLarge { n: 30, limit: 20 }),
            PsStatus::TooLarge
        );
        assert_eq!(
            status_of(&Error::InvalidInstance("x".into())),
            PsStatus::InvalidInstance
        );
        assert_eq!(status_of(&Error::WrongBacking), PsStatus::InvalidArgument);
    }

    #[test]
    fn panics_become_internal() {
        assert_eq!(guard(|| panic!("boom")), PsStatus::Internal);
        assert!(!ps_last_error_message().is_null());
        assert_eq!(guard(|| PsStatus::Ok), PsStatus::Ok);
        assert!(ps_last_error_message().is_null());
    }
}
