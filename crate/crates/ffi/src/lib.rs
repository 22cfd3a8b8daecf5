//! C interface to meroval.
//!
//! Every function returns a [`MerovalStatus`]. On failure the message is
//! available from [`meroval_last_error`] on the same thread. Strings handed
//! out through `out` parameters are owned by the caller and must be released
//! with [`meroval_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use meroval::atp::{prove_tptp, szs_output, AtpBudget, AtpError, ProverConfig};
use meroval::logic::Budget;
use meroval::service::{RunSettings, Scope, ServiceError, Workspace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MerovalStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    Conflict = 4,
    InvalidInput = 5,
    Cancelled = 6,
    Io = 7,
    Internal = 8,
}

/// Opaque workspace handle.
pub struct MerovalWorkspace {
    inner: Workspace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MerovalStatus, String);

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let code = match &e {
            ServiceError::NotFound(_) | ServiceError::NotInitialized(_) => MerovalStatus::NotFound,
            ServiceError::Conflict { .. } | ServiceError::AlreadyInitialized(_) => MerovalStatus::Conflict,
            ServiceError::Cancelled => MerovalStatus::Cancelled,
            ServiceError::Io(_) => MerovalStatus::Io,
            ServiceError::Corrupt(_) => MerovalStatus::Internal,
            _ => MerovalStatus::InvalidInput,
        };
        Failure(code, e.to_string())
    }
}

impl From<AtpError> for Failure {
    fn from(e: AtpError) -> Self {
        Failure::from(ServiceError::from(e))
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MerovalStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MerovalStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("panic inside meroval");
            MerovalStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(MerovalStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(MerovalStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn handle<'a>(ws: *const MerovalWorkspace) -> Result<&'a Workspace, Failure> {
    ws.as_ref().map(|w| &w.inner).ok_or_else(|| Failure(MerovalStatus::NullArgument, "workspace is null".into()))
}

unsafe fn give_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(MerovalStatus::NullArgument, "out is null".into()));
    }
    let c = CString::new(s).map_err(|_| Failure(MerovalStatus::Internal, "output contains nul".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn give_handle(out: *mut *mut MerovalWorkspace, ws: Workspace) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(MerovalStatus::NullArgument, "out is null".into()));
    }
    *out = Box::into_raw(Box::new(MerovalWorkspace { inner: ws }));
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string(v).map_err(|e| Failure(MerovalStatus::Internal, e.to_string()))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next call into the library from the same thread; do not free.
#[no_mangle]
pub extern "C" fn meroval_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn meroval_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a new workspace directory.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meroval_workspace_init(path: *const c_char, out: *mut *mut MerovalWorkspace) -> MerovalStatus {
    guard(|| give_handle(out, Workspace::init(text(path, "path")?)?))
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meroval_workspace_open(path: *const c_char, out: *mut *mut MerovalWorkspace) -> MerovalStatus {
    guard(|| give_handle(out, Workspace::open(text(path, "path")?)?))
}

/// # Safety
/// `ws` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn meroval_workspace_free(ws: *mut MerovalWorkspace) {
    if !ws.is_null() {
        drop(Box::from_raw(ws));
    }
}

/// Loads corpus, ontology and mapping text. `index` may be null.
///
/// # Safety
/// Pointers must be valid nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn meroval_workspace_ingest(
    ws: *const MerovalWorkspace,
    data: *const c_char,
    index: *const c_char,
    ontology: *const c_char,
    mapping: *const c_char,
) -> MerovalStatus {
    guard(|| {
        let w = handle(ws)?;
        w.ingest(text(data, "data")?, opt_text(index, "index")?, text(ontology, "ontology")?, text(mapping, "mapping")?)?;
        Ok(())
    })
}

/// Applies an ontology correction patch.
///
/// # Safety
/// `ws` must be a live handle; `patch` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn meroval_workspace_apply_patch(ws: *const MerovalWorkspace, patch: *const c_char) -> MerovalStatus {
    guard(|| {
        handle(ws)?.apply_patch(text(patch, "patch")?)?;
        Ok(())
    })
}

/// Evaluates every pair. `prover` is a prover spec as accepted by the CLI
/// or null for the built-in prover. Writes the metric rows as JSON.
///
/// # Safety
/// `ws` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meroval_workspace_evaluate(
    ws: *const MerovalWorkspace,
    prover: *const c_char,
    seconds: u64,
    jobs: u32,
    out: *mut *mut c_char,
) -> MerovalStatus {
    guard(|| {
        let w = handle(ws)?;
        let config = match opt_text(prover, "prover")? {
            Some(spec) => ProverConfig::from_spec(spec)?,
            None => ProverConfig::builtin(),
        };
        let settings =
            RunSettings { portfolio: vec![config], budget: AtpBudget { seconds, ..AtpBudget::default() }, jobs: jobs.max(1) as usize };
        let runner = w.runner(&settings);
        let (_, ev) = w.evaluate(&runner, settings.jobs, &Scope::default(), None)?;
        give_string(out, json(&ev.metrics)?)
    })
}

/// Text metric table of the latest evaluation.
///
/// # Safety
/// `ws` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meroval_workspace_report(ws: *const MerovalWorkspace, out: *mut *mut c_char) -> MerovalStatus {
    guard(|| give_string(out, handle(ws)?.report()?))
}

/// Replays the journal and writes the state hash.
///
/// # Safety
/// `ws` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meroval_workspace_verify(ws: *const MerovalWorkspace, out: *mut *mut c_char) -> MerovalStatus {
    guard(|| give_string(out, handle(ws)?.verify()?))
}

/// Runs the built-in prover on a TPTP problem and writes an SZS report.
///
/// # Safety
/// `problem` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn meroval_prove_tptp(problem: *const c_char, seconds: f64, out: *mut *mut c_char) -> MerovalStatus {
    guard(|| {
        let v = prove_tptp(text(problem, "problem")?, Budget { max_seconds: seconds, ..Budget::default() })?;
        give_string(out, szs_output(&v, "problem"))
    })
}
