use std::ffi::{CStr, CString};
use std::ptr;

use obsim_ffi::*;

const SCENARIO: &str = r#"
[sim]
horizon = "5ms"
traffic_until = "4ms"
seed = 9

[topology]
preset = "figure1"

[[traffic]]
source = "N1"
dest = "N10"
rate_pps = 40000
length = { min = "100B", max = "1500B" }

[[faults]]
link = ["N6", "N10"]
fail_at = "2ms"
"#;

fn parse(text: &str) -> (ObsStatus, *mut ObsScenario) {
    let c = CString::new(text).unwrap();
    let mut sc = ptr::null_mut();
    let status = unsafe { obs_scenario_parse(c.as_ptr(), &mut sc) };
    (status, sc)
}

fn last_error() -> String {
    let p = obs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { obs_string_free(p) };
    s
}

#[test]
fn parse_run_and_read_back() {
    let (status, sc) = parse(SCENARIO);
    assert_eq!(status, ObsStatus::Ok);
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { obs_run(sc, true, &mut rep) }, ObsStatus::Ok);
    let mut c = ObsCounts::default();
    assert_eq!(unsafe { obs_report_counts(rep, &mut c) }, ObsStatus::Ok);
    assert!(c.generated > 0);
    assert_eq!(c.generated, c.delivered + c.lost + c.queued + c.in_flight);
    let rate = unsafe { obs_report_loss_rate(rep) };
    assert_eq!(rate, c.lost as f64 / c.generated as f64);

    let json: serde_json::Value = serde_json::from_str(&take_string(unsafe { obs_report_json(rep) })).unwrap();
    assert_eq!(json["generated"], c.generated);
    let trace = take_string(unsafe { obs_report_trace_csv(rep) });
    assert!(trace.starts_with("time_us,kind,node,burst_id,detail\n"));
    assert!(trace.contains("link_fail"));

    let toml = take_string(unsafe { obs_scenario_to_toml(sc) });
    let (status, again) = parse(&toml);
    assert_eq!(status, ObsStatus::Ok);
    unsafe {
        obs_scenario_free(again);
        obs_report_free(rep);
        obs_scenario_free(sc);
    }
}

#[test]
fn same_seed_same_json() {
    let run = |seed: u64| {
        let mut sc = ptr::null_mut();
        assert_eq!(unsafe { obs_scenario_default(&mut sc) }, ObsStatus::Ok);
        assert_eq!(unsafe { obs_scenario_set_seed(sc, seed) }, ObsStatus::Ok);
        let mut rep = ptr::null_mut();
        assert_eq!(unsafe { obs_run(sc, false, &mut rep) }, ObsStatus::Ok);
        let json = take_string(unsafe { obs_report_json(rep) });
        unsafe {
            obs_report_free(rep);
            obs_scenario_free(sc);
        }
        json
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn errors_are_reported() {
    let (status, sc) = parse("[topology\n");
    assert_eq!(status, ObsStatus::Syntax);
    assert!(sc.is_null());
    assert!(last_error().contains("line 1"));

    let (status, _) = parse("[topology]\npreset = \"figure1\"\n[protocol]\nt_s = \"0us\"\n");
    assert_eq!(status, ObsStatus::Validation);
    assert!(last_error().contains("protocol.t_s"));

    let path = CString::new("/definitely/not/here.toml").unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { obs_scenario_load(path.as_ptr(), &mut sc) }, ObsStatus::Io);

    assert_eq!(unsafe { obs_scenario_parse(ptr::null(), &mut sc) }, ObsStatus::NullArgument);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { obs_scenario_parse(bad.as_ptr().cast(), &mut sc) }, ObsStatus::InvalidUtf8);
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { obs_run(ptr::null(), false, &mut rep) }, ObsStatus::NullArgument);
    assert!(unsafe { obs_report_loss_rate(ptr::null()) }.is_nan());
    assert!(unsafe { obs_report_json(ptr::null()) }.is_null());
    unsafe {
        obs_scenario_free(ptr::null_mut());
        obs_report_free(ptr::null_mut());
        obs_string_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(obs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_current_and_compiles() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/obsim.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "obs_scenario_parse",
        "obs_scenario_load",
        "obs_scenario_default",
        "obs_scenario_set_seed",
        "obs_scenario_to_toml",
        "obs_scenario_free",
        "obs_run",
        "obs_report_counts",
        "obs_report_loss_rate",
        "obs_report_json",
        "obs_report_trace_csv",
        "obs_report_free",
        "obs_string_free",
        "obs_last_error",
        "obs_version",
        "OBS_STATUS_VALIDATION",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    // Syntax-check with the system C compiler when one is installed.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
