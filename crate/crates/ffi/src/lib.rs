//! C interface to the federation simulator.
//!
//! Handles are opaque and owned by the caller: everything returned through
//! an out-pointer must be released with the matching `*_free` function.
//! Every fallible call returns a [`FedgmcStatus`]; on failure the message
//! is available from [`fedgmc_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fedgmc::cli::RunConfig;
use fedgmc::fedsim::{export_history, run_on_graph, FederationOutcome};
use fedgmc::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FedgmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    Runtime = 6,
    Panic = 7,
}

impl From<&Error> for FedgmcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => FedgmcStatus::Config,
            Error::Io { .. } => FedgmcStatus::Io,
            Error::Format(_) | Error::Parse { .. } => FedgmcStatus::Format,
            _ => FedgmcStatus::Runtime,
        }
    }
}

/// Run configuration.
pub struct FedgmcConfig {
    inner: RunConfig,
}

/// Completed federation: per-round history and final client models.
pub struct FedgmcRun {
    outcome: FederationOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: FedgmcStatus, msg: impl Into<String>) -> FedgmcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> FedgmcStatus) -> FedgmcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(FedgmcStatus::Panic, "internal panic"),
    }
}

fn from_error(e: Error) -> FedgmcStatus {
    fail(FedgmcStatus::from(&e), e.to_string())
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, FedgmcStatus> {
    if s.is_null() {
        return Err(fail(FedgmcStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(FedgmcStatus::InvalidArgument, "string is not valid UTF-8"))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fedgmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default configuration. Never NULL.
#[no_mangle]
pub extern "C" fn fedgmc_config_default() -> *mut FedgmcConfig {
    Box::into_raw(Box::new(FedgmcConfig {
        inner: RunConfig::default(),
    }))
}

/// Parses a TOML configuration. Relative data paths resolve against the
/// current directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_config_parse(toml: *const c_char, out: *mut *mut FedgmcConfig) -> FedgmcStatus {
    guard(|| {
        if out.is_null() {
            return fail(FedgmcStatus::NullPointer, "null out pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::parse(text, Path::new(".")).and_then(|c| c.validate().map(|_| c)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FedgmcConfig { inner }));
                FedgmcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets the data and federation seeds.
///
/// # Safety
/// `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_config_set_seed(config: *mut FedgmcConfig, seed: u64) -> FedgmcStatus {
    guard(|| match config.as_mut() {
        Some(c) => {
            c.inner.set_seed(seed);
            FedgmcStatus::Ok
        }
        None => fail(FedgmcStatus::NullPointer, "null config"),
    })
}

/// # Safety
/// `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_config_set_rounds(config: *mut FedgmcConfig, rounds: u32) -> FedgmcStatus {
    guard(|| match config.as_mut() {
        Some(c) => {
            c.inner.federation.rounds = rounds as usize;
            FedgmcStatus::Ok
        }
        None => fail(FedgmcStatus::NullPointer, "null config"),
    })
}

/// `ablation` is a comma list of `semantic`, `structural`, `refinement`,
/// or `local`; `none` restores the full method.
///
/// # Safety
/// `config` must come from this library; `ablation` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_config_set_ablation(
    config: *mut FedgmcConfig,
    ablation: *const c_char,
) -> FedgmcStatus {
    guard(|| {
        let Some(c) = config.as_mut() else {
            return fail(FedgmcStatus::NullPointer, "null config");
        };
        let text = match read_str(ablation) {
            Ok(t) => t,
            Err(s) => return s,
        };
        if let Err(e) = text.parse::<fedgmc::fedsim::Ablation>() {
            return from_error(e);
        }
        c.inner.federation.ablate = text.to_string();
        FedgmcStatus::Ok
    })
}

/// # Safety
/// `config` must come from this library or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_config_free(config: *mut FedgmcConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the federation. `threads == 0` uses the default pool size; the
/// result does not depend on it.
///
/// # Safety
/// `config` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_run(
    config: *const FedgmcConfig,
    threads: u32,
    out: *mut *mut FedgmcRun,
) -> FedgmcStatus {
    guard(|| {
        if out.is_null() {
            return fail(FedgmcStatus::NullPointer, "null out pointer");
        }
        *out = ptr::null_mut();
        let Some(c) = config.as_ref() else {
            return fail(FedgmcStatus::NullPointer, "null config");
        };
        let result = c.inner.validate().and_then(|_| {
            let fed = c.inner.federation()?;
            let graph = c.inner.dataset()?.load()?;
            run_on_graph(&fed, graph, (threads > 0).then_some(threads as usize))
        });
        match result {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(FedgmcRun { outcome }));
                FedgmcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of recorded rounds, 0 for NULL.
///
/// # Safety
/// `run` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_run_num_rounds(run: *const FedgmcRun) -> u32 {
    run.as_ref().map_or(0, |r| r.outcome.history.len() as u32)
}

/// Number of clients, 0 for NULL.
///
/// # Safety
/// `run` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_run_num_clients(run: *const FedgmcRun) -> u32 {
    run.as_ref().map_or(0, |r| r.outcome.clients.len() as u32)
}

/// Validation and test metric of `client` after round `round` (1-based).
///
/// # Safety
/// `run` must come from this library; `val` and `test` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_run_client_metrics(
    run: *const FedgmcRun,
    round: u32,
    client: u32,
    val: *mut f64,
    test: *mut f64,
) -> FedgmcStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            return fail(FedgmcStatus::NullPointer, "null run");
        };
        if val.is_null() || test.is_null() {
            return fail(FedgmcStatus::NullPointer, "null out pointer");
        }
        let stats = (round as usize)
            .checked_sub(1)
            .and_then(|i| r.outcome.history.get(i))
            .and_then(|rec| rec.clients.get(client as usize));
        match stats {
            Some(s) => {
                *val = s.val_metric;
                *test = s.test_metric;
                FedgmcStatus::Ok
            }
            None => fail(
                FedgmcStatus::InvalidArgument,
                format!("no record for round {round}, client {client}"),
            ),
        }
    })
}

/// Mean test metric over clients after the last round.
///
/// # Safety
/// `run` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_run_final_mean_test(run: *const FedgmcRun, out: *mut f64) -> FedgmcStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            return fail(FedgmcStatus::NullPointer, "null run");
        };
        if out.is_null() {
            return fail(FedgmcStatus::NullPointer, "null out pointer");
        }
        match r.outcome.final_mean_test() {
            Some(m) => {
                *out = m;
                FedgmcStatus::Ok
            }
            None => fail(FedgmcStatus::InvalidArgument, "run has no rounds"),
        }
    })
}

/// Writes the history CSV to `path`.
///
/// # Safety
/// `run` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_run_write_history(run: *const FedgmcRun, path: *const c_char) -> FedgmcStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            return fail(FedgmcStatus::NullPointer, "null run");
        };
        let path = match read_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match export_history(&r.outcome.history, Path::new(path)) {
            Ok(()) => FedgmcStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `run` must come from this library or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fedgmc_run_free(run: *mut FedgmcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
