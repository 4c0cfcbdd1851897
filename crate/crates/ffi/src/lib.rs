//! C ABI over combforge.
//!
//! Collections live behind opaque handles. Every fallible call returns a
//! [`CfStatus`]; on failure the message is available from
//! [`cf_last_error_message`] on the same thread. Strings returned through
//! out-parameters must be released with [`cf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use combforge::games::{verify_theorem1, verify_theorem2, VerifyOptions};
use combforge::incompat::{convex_weight, is_compatible_collection, robustness, Compatibility};
use combforge::instances::{qubit_mub_collection, random_collection, NetworkShape, PovmKind};
use combforge::io::CollectionJson;
use combforge::tester::TesterCollection;
use combforge::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Format = 3,
    Validation = 4,
    Solver = 5,
    CapExceeded = 6,
    Panic = 7,
}

/// Verdict of [`cf_is_compatible`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfVerdict {
    Incompatible = 0,
    Compatible = 1,
    Undecided = 2,
}

/// Opaque tester collection.
pub struct CfCollection {
    inner: TesterCollection,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CfStatus {
    match e {
        Error::Format(_) => CfStatus::Format,
        Error::Solver(_) => CfStatus::Solver,
        Error::CapExceeded { .. } => CfStatus::CapExceeded,
        _ => CfStatus::Validation,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (CfStatus, String)>) -> CfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside combforge".into());
            CfStatus::Panic
        }
    }
}

fn lib<T>(r: combforge::Result<T>) -> Result<T, (CfStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (CfStatus, String) {
    (CfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn collection<'a>(h: *const CfCollection) -> Result<&'a TesterCollection, (CfStatus, String)> {
    // SAFETY: the caller passes a handle obtained from this library or null.
    unsafe { h.as_ref() }.map(|c| &c.inner).ok_or_else(|| null("collection handle"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (CfStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: checked non-null; the caller guarantees it is writable.
    unsafe { out.write(value) };
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

fn publish(out: *mut *mut CfCollection, inner: TesterCollection) -> Result<(), (CfStatus, String)> {
    let h = Box::into_raw(Box::new(CfCollection { inner }));
    // SAFETY: out is checked in write_out; on failure the handle is reclaimed.
    match unsafe { write_out(out, h) } {
        Ok(()) => Ok(()),
        Err(e) => {
            drop(unsafe { Box::from_raw(h) });
            Err(e)
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn cf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a collection from JSON (`{"testers": [{"slots": n, "effects": [...]}]}`).
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cf_collection_from_json(json: *const c_char, out: *mut *mut CfCollection) -> CfStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        // SAFETY: the caller guarantees a NUL-terminated string.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| (CfStatus::InvalidUtf8, e.to_string()))?;
        let parsed: CollectionJson =
            serde_json::from_str(text).map_err(|e| (CfStatus::Format, e.to_string()))?;
        publish(out, lib(parsed.to_collection())?)
    })
}

/// Probe-trivial (`input_dim = 1`) or maximally mixed probe qubit testers in
/// mutually unbiased bases.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_collection_qubit_mub(testers: usize, input_dim: usize, out: *mut *mut CfCollection) -> CfStatus {
    guard(|| publish(out, lib(qubit_mub_collection(testers, input_dim))?))
}

/// Random testers with a shared probe and projective final measurements.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_collection_random(
    slots: usize,
    probe_trivial: bool,
    testers: usize,
    outcomes: usize,
    seed: u64,
    out: *mut *mut CfCollection,
) -> CfStatus {
    guard(|| {
        let shape = if probe_trivial {
            NetworkShape::probe_trivial(slots, 2)
        } else {
            NetworkShape::qubits(slots)
        };
        publish(out, lib(random_collection(&shape, testers, outcomes, PovmKind::Projective, seed))?)
    })
}

/// Releases a collection. Null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cf_collection_free(handle: *mut CfCollection) {
    if !handle.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Number of testers and outcomes per tester.
///
/// # Safety
/// `handle` must be a live collection; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_collection_shape(handle: *const CfCollection, testers: *mut usize, outcomes: *mut usize) -> CfStatus {
    guard(|| {
        let c = unsafe { collection(handle) }?;
        unsafe { write_out(testers, c.len()) }?;
        unsafe { write_out(outcomes, c.outcomes()) }
    })
}

/// Serializes a collection to JSON.
///
/// # Safety
/// `handle` must be a live collection and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cf_collection_to_json(handle: *const CfCollection, out: *mut *mut c_char) -> CfStatus {
    guard(|| {
        let c = unsafe { collection(handle) }?;
        let s = serde_json::to_string(&CollectionJson::from(c)).map_err(|e| (CfStatus::Format, e.to_string()))?;
        unsafe { write_out(out, into_c_string(s)) }
    })
}

/// Robustness of incompatibility.
///
/// # Safety
/// `handle` must be a live collection and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn cf_robustness(handle: *const CfCollection, value: *mut f64) -> CfStatus {
    guard(|| {
        let c = unsafe { collection(handle) }?;
        let cert = lib(robustness(c))?;
        unsafe { write_out(value, cert.value) }
    })
}

/// Convex weight of incompatibility.
///
/// # Safety
/// `handle` must be a live collection and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn cf_convex_weight(handle: *const CfCollection, value: *mut f64) -> CfStatus {
    guard(|| {
        let c = unsafe { collection(handle) }?;
        let cert = lib(convex_weight(c))?;
        unsafe { write_out(value, cert.value) }
    })
}

/// Compatibility verdict.
///
/// # Safety
/// `handle` must be a live collection and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn cf_is_compatible(handle: *const CfCollection, verdict: *mut CfVerdict) -> CfStatus {
    guard(|| {
        let c = unsafe { collection(handle) }?;
        let v = match is_compatible_collection(c) {
            Compatibility::Compatible { .. } => CfVerdict::Compatible,
            Compatibility::Incompatible { .. } => CfVerdict::Incompatible,
            Compatibility::Undecided { .. } => CfVerdict::Undecided,
        };
        unsafe { write_out(verdict, v) }
    })
}

/// Full robustness certificate as JSON.
///
/// # Safety
/// `handle` must be a live collection and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cf_robustness_json(handle: *const CfCollection, out: *mut *mut c_char) -> CfStatus {
    guard(|| {
        let c = unsafe { collection(handle) }?;
        let cert = lib(robustness(c))?;
        let s = serde_json::to_string(&cert).map_err(|e| (CfStatus::Format, e.to_string()))?;
        unsafe { write_out(out, into_c_string(s)) }
    })
}

/// Verifies the discrimination (`theorem = 1`) or exclusion (`theorem = 2`)
/// advantage and returns the report as JSON.
///
/// # Safety
/// `handle` must be a live collection and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cf_verify_theorem_json(
    handle: *const CfCollection,
    theorem: u32,
    random_ensembles: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> CfStatus {
    guard(|| {
        let c = unsafe { collection(handle) }?;
        let opts = VerifyOptions {
            random_ensembles,
            seed,
            ..VerifyOptions::default()
        };
        let report = match theorem {
            1 => lib(verify_theorem1(c, &opts))?,
            2 => lib(verify_theorem2(c, &opts))?,
            t => return Err((CfStatus::Format, format!("theorem must be 1 or 2, got {t}"))),
        };
        let s = serde_json::to_string(&report).map_err(|e| (CfStatus::Format, e.to_string()))?;
        unsafe { write_out(out, into_c_string(s)) }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cf_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string was produced by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}
