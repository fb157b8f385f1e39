use std::ffi::{CStr, CString};
use std::ptr;

use concentration_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = conc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn exponential_psi1_through_handle() {
    let mut h = ptr::null_mut();
    let json = c(r#"{"kind":"Exponential","rate":1.0}"#);
    unsafe {
        assert_eq!(conc_distribution_from_json(json.as_ptr(), &mut h), ConcStatus::Ok);
        let mut v = 0.0;
        assert_eq!(conc_distribution_psi_norm(h, 1, &mut v), ConcStatus::Ok);
        assert!((v - 1.0).abs() < 1e-6);
        assert_eq!(conc_distribution_psi_norm(h, 3, &mut v), ConcStatus::InvalidParameter);
        assert!(last_error().contains("alpha"));
        let mut xs = [0.0; 5];
        assert_eq!(conc_distribution_sample(h, 9, xs.len(), xs.as_mut_ptr()), ConcStatus::Ok);
        assert!(xs.iter().all(|&x| x >= 0.0));
        conc_distribution_free(h);
    }
}

#[test]
fn bad_inputs_report_status() {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(conc_distribution_from_json(ptr::null(), &mut h), ConcStatus::NullPointer);
        let json = c(r#"{"kind":"Exponential","rate":-1.0}"#);
        assert_eq!(conc_distribution_from_json(json.as_ptr(), &mut h), ConcStatus::InvalidParameter);
        let json = c(r#"{"kind":"Nope"}"#);
        assert_eq!(conc_distribution_from_json(json.as_ptr(), &mut h), ConcStatus::InvalidJson);
        assert!(h.is_null());
        let mut out = 0.0;
        assert_eq!(conc_vector_bound_ii(1.0, 2, 0.01, &mut out), ConcStatus::Precondition);
        assert!(last_error().contains("n >= ln(1/delta)"));
        conc_distribution_free(ptr::null_mut());
    }
}

#[test]
fn function_profile_tail_and_inversion() {
    let json = c(r#"{"kind":"Sum","components":[{"kind":"Rademacher"},{"kind":"Rademacher"},{"kind":"Rademacher"}]}"#);
    let (mut f, mut p) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(conc_function_from_json(json.as_ptr(), &mut f), ConcStatus::Ok);
        assert_eq!(conc_function_profile(f, &mut p), ConcStatus::Ok);
        let mut prob = 0.0;
        assert_eq!(conc_tail(p, ConcBoundKind::Thm2, f64::NAN, 2.0, &mut prob), ConcStatus::Ok);
        let e = std::f64::consts::E;
        let want = (-4.0 / (4.0 * e * e * 3.0 + 2.0 * e * 2.0)).exp();
        assert!((prob - want).abs() < 1e-12);
        let (mut exact, mut additive) = (0.0, 0.0);
        assert_eq!(conc_invert(p, ConcBoundKind::Thm2, f64::NAN, 0.05, &mut exact, &mut additive), ConcStatus::Ok);
        assert!(exact <= additive);
        assert_eq!(conc_tail(p, ConcBoundKind::Thm3, 3.0, 1.0, &mut prob), ConcStatus::InvalidParameter);
        let mut xs = [0.0; 4];
        assert_eq!(conc_function_sample(f, 1, 4, xs.as_mut_ptr()), ConcStatus::Ok);
        assert!(xs.iter().all(|x| [-3.0, -1.0, 1.0, 3.0].contains(x)));
        conc_profile_free(p);
        conc_function_free(f);
    }
}

#[test]
fn profile_from_json_and_metric_tail() {
    let json = c(r#"{"n":2,"psi1_per_coord":[1.0,0.5],"ranges":[2.0,null]}"#);
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(conc_profile_from_json(json.as_ptr(), &mut p), ConcStatus::Ok);
        let mut prob = 0.0;
        assert_eq!(conc_tail(p, ConcBoundKind::BoundedDifference, f64::NAN, 1.0, &mut prob), ConcStatus::Ok);
        assert_eq!(prob, 1.0);
        conc_profile_free(p);
        let d = [0.4; 5];
        assert_eq!(conc_metric_tail(1.0, d.as_ptr(), d.len(), 1.0, false, &mut prob), ConcStatus::Ok);
        let e = std::f64::consts::E;
        assert!((prob - (-1.0 / (4.0 * e * 5.0 * 0.16 + 2.0 * e * 0.4)).exp()).abs() < 1e-14);
    }
}

#[test]
fn application_bounds() {
    let mut out = 0.0;
    unsafe {
        let psi = [1.0; 4];
        assert_eq!(conc_vector_bound_i(psi.as_ptr(), 4, 0.1, &mut out), ConcStatus::Ok);
        assert_eq!(conc_vector_bound_iii(0.1, 1.0, 2.0, 100, 0.6, &mut out), ConcStatus::Precondition);
        assert_eq!(conc_psa_bound(1.0, 1, 100, 0.02, &mut out), ConcStatus::Ok);
        assert_eq!(conc_rademacher_bound(0.0, 1.0, 1.0, 100, 0.1, &mut out), ConcStatus::Ok);
        assert_eq!(conc_regression_bound(1.0, 1.0, 0.0, 100, 1.0 / std::f64::consts::E, &mut out), ConcStatus::Ok);
        assert!((out - 0.8 * (1.0 + 2.0 * std::f64::consts::E)).abs() < 1e-12);
    }
}

#[test]
fn verification_report_round_trip() {
    let cfg = c(r#"{
        "function": {"kind":"Sum","components":[{"kind":"Exponential","rate":1.0},{"kind":"Exponential","rate":1.0}]},
        "bounds": ["thm2"],
        "t_grid": [0.5, 1.0, 2.0],
        "n": 20000,
        "seed": 3
    }"#);
    let mut report = ptr::null_mut();
    let mut violation = -1;
    unsafe {
        assert_eq!(conc_verify(cfg.as_ptr(), 2, &mut report, &mut violation), ConcStatus::Ok);
        assert_eq!(violation, 0);
        let text = CStr::from_ptr(report).to_str().unwrap().to_owned();
        conc_string_free(report);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["verdict"], "SOUND");
        assert_eq!(v["rows"].as_array().unwrap().len(), 3);
        let mut again = ptr::null_mut();
        assert_eq!(conc_verify(cfg.as_ptr(), 1, &mut again, &mut violation), ConcStatus::Ok);
        assert_eq!(CStr::from_ptr(again).to_str().unwrap(), text);
        conc_string_free(again);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/concentration.h")).unwrap();
    for name in [
        "CONCENTRATION_H",
        "ConcStatus_Ok",
        "ConcBoundKind_Thm2",
        "typedef struct ConcProfile ConcProfile",
        "conc_distribution_from_json",
        "conc_function_profile",
        "conc_tail",
        "conc_invert",
        "conc_verify",
        "conc_string_free",
        "conc_last_error_message",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/concentration.h");
    let Ok(status) = std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).status() else {
        eprintln!("no C compiler found; skipped");
        return;
    };
    assert!(status.success());
}
