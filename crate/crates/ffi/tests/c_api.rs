use std::ffi::{CStr, CString};
use std::ptr;

use gerbe_index_ffi::*;

fn load(name: &str) -> *mut GiScenario {
    let name = CString::new(name).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gi_scenario_load(name.as_ptr(), &mut s) }, GiStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gi_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn ddclass_of_the_suspended_gerbe() {
    let s = load("suspended-rp2-gerbe");
    let mut order = 0u64;
    let mut summary = ptr::null_mut();
    assert_eq!(unsafe { gi_ddclass(s, &mut order, &mut summary) }, GiStatus::Ok);
    assert_eq!(order, 2);
    let text = unsafe { CStr::from_ptr(summary) }.to_str().unwrap().to_owned();
    assert!(text.contains("Z/2"), "{text}");
    unsafe {
        gi_string_free(summary);
        gi_scenario_free(s);
    }
}

#[test]
fn chern_report_through_handles() {
    let s = load("monopole");
    let mut r = ptr::null_mut();
    let opts = GiRunOptions { resolution: 16, truncation: 0, tolerance: 1e-3 };
    assert_eq!(unsafe { gi_run(s, GiCommand::Chern, opts, &mut r) }, GiStatus::Ok);
    assert!(unsafe { gi_report_passed(r) });
    assert!(unsafe { gi_report_integral_count(r) } >= 1);
    let (mut value, mut name) = (0.0, ptr::null_mut());
    assert_eq!(unsafe { gi_report_integral(r, 0, &mut value, &mut name) }, GiStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(name) }.to_str().unwrap(), "c1");
    assert!((value - 1.0).abs() < 1e-3);
    assert_eq!(unsafe { gi_report_integral(r, 999, &mut value, ptr::null_mut()) }, GiStatus::OutOfRange);
    let json = unsafe { gi_report_json(r) };
    let parsed: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(parsed["scenario"], "monopole");
    unsafe {
        gi_string_free(name);
        gi_string_free(json);
        gi_report_free(r);
        gi_scenario_free(s);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let text = CString::new("version = \"gerbe-index/0\"\nname = \"x\"\n").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gi_scenario_parse(text.as_ptr(), &mut s) }, GiStatus::InputError);
    assert!(s.is_null());
    assert!(last_error().contains("unsupported scenario version"));

    assert_eq!(unsafe { gi_scenario_load(ptr::null(), &mut s) }, GiStatus::NullPointer);
    let s = load("monopole");
    let mut r = ptr::null_mut();
    let status = unsafe { gi_run(s, GiCommand::IndexAnalytic, GiRunOptions::default(), &mut r) };
    assert_eq!(status, GiStatus::InputError);
    assert!(last_error().contains("family"));
    unsafe {
        gi_scenario_free(s);
        gi_scenario_free(ptr::null_mut());
        gi_report_free(ptr::null_mut());
        gi_string_free(ptr::null_mut());
    }
}

#[test]
fn header_is_generated_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/gerbe_index.h");
    let text = std::fs::read_to_string(header).unwrap();
    for symbol in ["gi_scenario_load", "gi_run", "gi_report_free", "gi_last_error", "GI_STATUS_NULL_POINTER"] {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
    if let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
