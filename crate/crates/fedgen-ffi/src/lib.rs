//! C ABI for the simulator.
//!
//! Conventions:
//! - every fallible call returns an `i32` status code (`FG_OK` on success);
//! - results live behind the opaque `FgRun` handle, freed with `fg_run_free`;
//! - the last error message is thread-local, fetched with `fg_last_error`
//!   and valid until the next failing call on the same thread;
//! - strings are NUL-terminated UTF-8.
//!
//! The matching declarations live in `include/fedgen.h` (cbindgen layout,
//! maintained alongside this file; `cbindgen --config cbindgen.toml` rebuilds
//! it where the tool is available).

use fedgen::error::Error;
use fedgen::experiment::{self, ExperimentConfig};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

pub const FG_OK: i32 = 0;
pub const FG_ERR_CONFIG: i32 = 1;
pub const FG_ERR_RUNTIME: i32 = 2;
pub const FG_ERR_ARGUMENT: i32 = 3;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => FG_ERR_CONFIG,
        _ => FG_ERR_RUNTIME,
    }
}

/// Opaque handle over one protocol run.
pub struct FgRun {
    result: fedgen::RunResult,
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

unsafe fn parse_config(config_json: *const c_char) -> Result<ExperimentConfig, i32> {
    if config_json.is_null() {
        set_error("config_json is NULL".into());
        return Err(FG_ERR_ARGUMENT);
    }
    let text = match CStr::from_ptr(config_json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("config_json is not valid UTF-8".into());
            return Err(FG_ERR_ARGUMENT);
        }
    };
    ExperimentConfig::from_json(text).map_err(|e| {
        set_error(e.to_string());
        code_for(&e)
    })
}

/// Run the configured protocol for a single seed. On success, stores a new
/// handle in `*out_run`; free it with `fg_run_free`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string or NULL; `out_run` must
/// point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_run_experiment(
    config_json: *const c_char,
    seed: u64,
    out_run: *mut *mut FgRun,
) -> i32 {
    if out_run.is_null() {
        set_error("out_run is NULL".into());
        return FG_ERR_ARGUMENT;
    }
    *out_run = ptr::null_mut();
    let cfg = match parse_config(config_json) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    match experiment::run_cell(&cfg, seed) {
        Ok(outcome) => {
            *out_run = Box::into_raw(Box::new(FgRun { result: outcome.result }));
            FG_OK
        }
        Err(e) => {
            set_error(e.to_string());
            code_for(&e)
        }
    }
}

/// Run the full seed grid of a config and write the CSV outputs under
/// `out_dir`, exactly like the CLI `run` subcommand.
///
/// # Safety
/// Both arguments must be NUL-terminated strings or NULL.
#[no_mangle]
pub unsafe extern "C" fn fg_run_to_files(config_json: *const c_char, out_dir: *const c_char) -> i32 {
    let cfg = match parse_config(config_json) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if out_dir.is_null() {
        set_error("out_dir is NULL".into());
        return FG_ERR_ARGUMENT;
    }
    let dir = match CStr::from_ptr(out_dir).to_str() {
        Ok(d) => d,
        Err(_) => {
            set_error("out_dir is not valid UTF-8".into());
            return FG_ERR_ARGUMENT;
        }
    };
    match experiment::run_experiment(&cfg, Path::new(dir)) {
        Ok(_) => FG_OK,
        Err(e) => {
            set_error(e.to_string());
            code_for(&e)
        }
    }
}

unsafe fn run_ref<'a>(run: *const FgRun) -> Option<&'a FgRun> {
    run.as_ref()
}

/// Test accuracy after the final round; NaN for a NULL handle.
///
/// # Safety
/// `run` must be a live handle from `fg_run_experiment` or NULL.
#[no_mangle]
pub unsafe extern "C" fn fg_run_final_accuracy(run: *const FgRun) -> f64 {
    run_ref(run).map_or(f64::NAN, |r| r.result.final_accuracy())
}

/// Number of recorded per-round accuracies; 0 for a NULL handle.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fg_run_rounds(run: *const FgRun) -> u32 {
    run_ref(run).map_or(0, |r| r.result.per_round_accuracy.len() as u32)
}

/// Fetch the accuracy recorded after round `round` (1-based) into `*out`.
///
/// # Safety
/// `run` must be a live handle or NULL; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_run_round_accuracy(run: *const FgRun, round: u32, out: *mut f64) -> i32 {
    let Some(r) = run_ref(run) else {
        set_error("run handle is NULL".into());
        return FG_ERR_ARGUMENT;
    };
    if out.is_null() {
        set_error("out is NULL".into());
        return FG_ERR_ARGUMENT;
    }
    if round == 0 || round as usize > r.result.per_round_accuracy.len() {
        set_error(format!(
            "round {round} out of range 1..={}",
            r.result.per_round_accuracy.len()
        ));
        return FG_ERR_ARGUMENT;
    }
    *out = r.result.per_round_accuracy[round as usize - 1];
    FG_OK
}

/// Total uplink bytes recorded by the run's ledger; 0 for a NULL handle.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fg_run_uplink_bytes(run: *const FgRun) -> u64 {
    run_ref(run).map_or(0, |r| r.result.ledger.uplink_bytes())
}

/// Total downlink bytes recorded by the run's ledger; 0 for a NULL handle.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fg_run_downlink_bytes(run: *const FgRun) -> u64 {
    run_ref(run).map_or(0, |r| r.result.ledger.downlink_bytes())
}

/// Copy of the run's communication ledger as a CSV string; free with
/// `fg_string_free`. NULL for a NULL handle.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fg_run_ledger_csv(run: *const FgRun) -> *mut c_char {
    match run_ref(run) {
        Some(r) => CString::new(r.result.ledger.to_csv_string())
            .map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// Free a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must have been returned by `fg_run_ledger_csv` and not freed before.
#[no_mangle]
pub unsafe extern "C" fn fg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Free a run handle. NULL is a no-op.
///
/// # Safety
/// `run` must have come from `fg_run_experiment` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fg_run_free(run: *mut FgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
