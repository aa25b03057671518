//! Calls through the exported C functions, as a foreign caller would.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use desabs_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let owned = CStr::from_ptr(s).to_str().unwrap().to_owned();
    desabs_string_free(s);
    owned
}

unsafe fn last_error() -> String {
    let p = desabs_last_error_message();
    assert!(!p.is_null(), "no error message recorded");
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

unsafe fn reference() -> (*mut DesSystem, *mut DesAutomaton) {
    let mut sys = ptr::null_mut();
    assert_eq!(desabs_system_double_integrator(&mut sys), DesStatus::Ok);
    let mut opts = std::mem::zeroed::<DesOptions>();
    assert_eq!(desabs_options_default(sys, &mut opts), DesStatus::Ok);
    assert_eq!(opts.samples_per_cell, 64);
    opts.samples_per_cell = 16;
    let mut a = ptr::null_mut();
    assert_eq!(desabs_extract(sys, &opts, &mut a), DesStatus::Ok);
    (sys, a)
}

#[test]
fn extract_check_and_reconstruct() {
    unsafe {
        let (sys, a) = reference();
        assert_eq!(desabs_automaton_num_states(a), 4);
        assert!(desabs_automaton_num_transitions(a) >= 8);

        let mut observable = false;
        let mut witnesses = 99;
        assert_eq!(
            desabs_check_observability(a, &mut observable, &mut witnesses),
            DesStatus::Ok
        );
        assert!(observable);
        assert_eq!(witnesses, 0);
        assert!(desabs_last_error_message().is_null());

        let mut out = ptr::null_mut();
        let mut failed = 7;
        let status = desabs_reconstruct(
            a,
            c("p2").as_ptr(),
            c("z1+,z2-,z1-,z2+").as_ptr(),
            &mut out,
            &mut failed,
        );
        assert_eq!(status, DesStatus::Ok);
        assert_eq!(take(out), "p2 p1 p4 p3 p2");
        assert_eq!(failed, 0);

        let status = desabs_reconstruct(
            a,
            c("p1").as_ptr(),
            c("z1+").as_ptr(),
            &mut out,
            &mut failed,
        );
        assert_eq!(status, DesStatus::Inadmissible);
        assert!(out.is_null());
        assert_eq!(failed, 1);
        assert!(last_error().contains("position 1"));

        desabs_automaton_free(a);
        desabs_system_free(sys);
    }
}

#[test]
fn json_round_trip_and_dot() {
    unsafe {
        let (sys, a) = reference();
        let mut json = ptr::null_mut();
        assert_eq!(desabs_automaton_to_json(a, &mut json), DesStatus::Ok);
        let json = take(json);
        let mut b = ptr::null_mut();
        assert_eq!(
            desabs_automaton_from_json(c(&json).as_ptr(), &mut b),
            DesStatus::Ok
        );
        assert_eq!(
            desabs_automaton_num_transitions(b),
            desabs_automaton_num_transitions(a)
        );

        let mut dot_a = ptr::null_mut();
        let mut dot_b = ptr::null_mut();
        assert_eq!(desabs_export_dot(a, &mut dot_a), DesStatus::Ok);
        assert_eq!(desabs_export_dot(b, &mut dot_b), DesStatus::Ok);
        let dot = take(dot_a);
        assert_eq!(dot, take(dot_b));
        assert!(dot.contains("\"p2\" -> \"p1\" [label=\"r3 / z1+\"];"));

        desabs_automaton_free(b);
        desabs_automaton_free(a);
        desabs_system_free(sys);
    }
}

#[test]
fn simulate_returns_trace_json() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(desabs_system_double_integrator(&mut sys), DesStatus::Ok);
        let x0 = [-1.0, 0.5];
        let mut out = ptr::null_mut();
        let status = desabs_simulate(
            sys,
            x0.as_ptr(),
            2,
            c("r3,r1,r1,r3").as_ptr(),
            ptr::null(),
            &mut out,
        );
        assert_eq!(status, DesStatus::Ok);
        let trace: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(
            trace["states"],
            serde_json::json!(["p2", "p1", "p4", "p3", "p2"])
        );
        assert_eq!(
            trace["symbols"],
            serde_json::json!(["z1+", "z2-", "z1-", "z2+"])
        );
        assert!((trace["event_times"][0].as_f64().unwrap() - 1.0).abs() < 1e-8);

        let origin = [0.0, 0.0];
        let status = desabs_simulate(
            sys,
            origin.as_ptr(),
            2,
            c("r1").as_ptr(),
            ptr::null(),
            &mut out,
        );
        assert_eq!(status, DesStatus::InvalidInput);
        assert!(out.is_null());
        desabs_system_free(sys);
    }
}

#[test]
fn system_from_json_reports_errors() {
    let file = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/examples/double_integrator.json"
    );
    let text = std::fs::read_to_string(file).unwrap();
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(
            desabs_system_from_json(c(&text).as_ptr(), &mut sys),
            DesStatus::Ok
        );
        assert!(!sys.is_null());
        desabs_system_free(sys);

        let broken = text.replace("\"normal\": [0, 1]", "\"normal\": [0, 0]");
        assert_eq!(
            desabs_system_from_json(c(&broken).as_ptr(), &mut sys),
            DesStatus::InvalidInput
        );
        assert!(sys.is_null());
        assert!(last_error().contains("functional 2"));
    }
}

#[test]
fn null_and_bad_arguments() {
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(
            desabs_extract(ptr::null(), ptr::null(), &mut a),
            DesStatus::NullPointer
        );
        assert!(last_error().contains("system"));
        assert_eq!(
            desabs_automaton_from_json(ptr::null(), &mut a),
            DesStatus::NullPointer
        );
        assert_eq!(
            desabs_automaton_from_json(c("{").as_ptr(), &mut a),
            DesStatus::InvalidInput
        );
        assert_eq!(desabs_automaton_num_states(ptr::null()), 0);
        desabs_automaton_free(ptr::null_mut());
        desabs_system_free(ptr::null_mut());
        desabs_string_free(ptr::null_mut());

        let mut sys = ptr::null_mut();
        assert_eq!(desabs_system_double_integrator(&mut sys), DesStatus::Ok);
        let mut opts = std::mem::zeroed::<DesOptions>();
        desabs_options_default(sys, &mut opts);
        opts.dt = -1.0;
        assert_eq!(desabs_extract(sys, &opts, &mut a), DesStatus::InvalidInput);
        desabs_system_free(sys);
    }
}

#[test]
fn abi_version_matches_header() {
    assert_eq!(desabs_abi_version(), DESABS_ABI_VERSION);
}
