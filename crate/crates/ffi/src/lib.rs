//! C ABI for the obsim simulator.
//!
//! Scenarios and reports are opaque heap handles owned by the caller and
//! released with their `_free` function. Every fallible call returns an
//! [`ObsStatus`]; on failure a message is available from
//! [`obs_last_error`] until the next failing call on the same thread.
//! Strings returned by this library must be released with
//! [`obs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use obsim::cli::{self, ScenarioError};
use obsim::engine::{run_with, EngineError, RunOptions, RunOutput, Scenario};
use obsim::routing::Router;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Syntax = 3,
    Validation = 4,
    Io = 5,
    Runtime = 6,
    Panic = 7,
}

/// A parsed and validated scenario.
pub struct ObsScenario {
    inner: Scenario,
}

/// The result of one simulation run.
pub struct ObsReport {
    inner: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: ObsStatus, msg: impl Into<String>) -> ObsStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> ObsStatus) -> ObsStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(ObsStatus::Panic, "internal panic"))
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, ObsStatus> {
    if p.is_null() {
        return Err(fail(ObsStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ObsStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

fn scenario_status(e: &ScenarioError) -> ObsStatus {
    match e {
        ScenarioError::Io { .. } => ObsStatus::Io,
        ScenarioError::Syntax(_) => ObsStatus::Syntax,
        ScenarioError::Invalid(_) => ObsStatus::Validation,
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message describing the most recent failure on this thread, or null.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn obs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn obs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn store_scenario(out: *mut *mut ObsScenario, result: Result<Scenario, ScenarioError>) -> ObsStatus {
    match result {
        Ok(sc) => {
            // SAFETY: checked non-null by the callers.
            unsafe { *out = Box::into_raw(Box::new(ObsScenario { inner: sc })) };
            ObsStatus::Ok
        }
        Err(e) => fail(scenario_status(&e), e.to_string()),
    }
}

/// Parses scenario text in the TOML scenario format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obs_scenario_parse(text: *const c_char, out: *mut *mut ObsScenario) -> ObsStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObsStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        match read_str(text) {
            Ok(t) => store_scenario(out, cli::parse_scenario(t)),
            Err(s) => s,
        }
    })
}

/// Reads and parses a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obs_scenario_load(path: *const c_char, out: *mut *mut ObsScenario) -> ObsStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObsStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        match read_str(path) {
            Ok(p) => store_scenario(out, cli::load_scenario(std::path::Path::new(p))),
            Err(s) => s,
        }
    })
}

/// The built-in default scenario.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obs_scenario_default(out: *mut *mut ObsScenario) -> ObsStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObsStatus::NullArgument, "null output pointer");
        }
        store_scenario(out, Ok(cli::default_scenario()))
    })
}

/// Replaces the traffic seed, and the routing seed when genetic routing
/// is selected.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn obs_scenario_set_seed(scenario: *mut ObsScenario, seed: u64) -> ObsStatus {
    guard(|| {
        let Some(sc) = scenario.as_mut() else {
            return fail(ObsStatus::NullArgument, "null scenario");
        };
        sc.inner.traffic.seed = seed;
        if let Router::Genetic(g) = &mut sc.inner.protocol.router {
            g.rng_seed = seed;
        }
        ObsStatus::Ok
    })
}

/// Serializes the scenario back to TOML. Free with [`obs_string_free`].
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn obs_scenario_to_toml(scenario: *const ObsScenario) -> *mut c_char {
    match scenario.as_ref() {
        Some(sc) => into_c_string(cli::serialize_scenario(&sc.inner)),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn obs_scenario_free(scenario: *mut ObsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the simulation. When `trace` is true the per-event trace is kept
/// and can be read with [`obs_report_trace_csv`].
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obs_run(scenario: *const ObsScenario, trace: bool, out: *mut *mut ObsReport) -> ObsStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObsStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(sc) = scenario.as_ref() else {
            return fail(ObsStatus::NullArgument, "null scenario");
        };
        match run_with(&sc.inner, RunOptions { trace }) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(ObsReport { inner: r }));
                ObsStatus::Ok
            }
            Err(e @ EngineError::Invalid(_)) => fail(ObsStatus::Validation, e.to_string()),
            Err(e) => fail(ObsStatus::Runtime, e.to_string()),
        }
    })
}

/// Packet counters of a report.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObsCounts {
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    pub queued: u64,
    pub in_flight: u64,
    pub bursts: u64,
    pub total_byte_hops: u64,
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obs_report_counts(report: *const ObsReport, out: *mut ObsCounts) -> ObsStatus {
    guard(|| {
        let (Some(r), false) = (report.as_ref(), out.is_null()) else {
            return fail(ObsStatus::NullArgument, "null argument");
        };
        let m = &r.inner.report;
        *out = ObsCounts {
            generated: m.generated,
            delivered: m.delivered,
            lost: m.lost,
            queued: m.queued,
            in_flight: m.in_flight,
            bursts: m.bursts.count,
            total_byte_hops: m.total_byte_hops,
        };
        ObsStatus::Ok
    })
}

/// Lost over generated packets; NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn obs_report_loss_rate(report: *const ObsReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.inner.report.packet_loss_rate)
}

/// The full metrics report as JSON. Free with [`obs_string_free`].
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn obs_report_json(report: *const ObsReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => into_c_string(cli::report_json(&r.inner.report)),
        None => ptr::null_mut(),
    }
}

/// The event trace as CSV (header only when tracing was off). Free with
/// [`obs_string_free`].
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn obs_report_trace_csv(report: *const ObsReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => into_c_string(cli::trace_csv(&r.inner)),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn obs_report_free(report: *mut ObsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn obs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
