use rvlab_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

const FLAT: &str = r#"
[manifold]
kind = "torus"
resolution = [16, 16]

[flow]
variant = "static"

[run]
t_end = 2.0
dt = 0.25

[reduced]
orientations = ["backwards"]
sample_times = [0.2, 0.4]

[geodesic]
lambda_samples = 16
subset_stride = 1

[checks]
draws = 1
"#;

fn last_error() -> Option<String> {
    let p = rv_last_error();
    if p.is_null() {
        return None;
    }
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { rv_string_free(p) };
    Some(s)
}

fn parse(text: &str) -> (i32, *mut RvConfig) {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let code = unsafe { rv_config_parse(c.as_ptr(), &mut cfg) };
    (code, cfg)
}

#[test]
fn bad_config_reports_code_and_message() {
    let (code, cfg) = parse("[manifold]\nkind = \"klein\"\n");
    assert_eq!(code, RV_ERR_CONFIG);
    assert!(cfg.is_null());
    assert!(last_error().unwrap().contains("klein"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { rv_config_parse(ptr::null(), &mut cfg) }, RV_ERR_NULL);
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { rv_evolve(ptr::null(), &mut sol) }, RV_ERR_NULL);
    unsafe {
        rv_config_free(ptr::null_mut());
        rv_solution_free(ptr::null_mut());
        rv_string_free(ptr::null_mut());
    }
}

#[test]
fn flat_torus_roundtrip() {
    let (code, cfg) = parse(FLAT);
    assert_eq!(code, RV_OK);
    assert_eq!(unsafe { rv_config_warning_count(cfg) }, 0);
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { rv_evolve(cfg, &mut sol) }, RV_OK);
    assert!(unsafe { rv_solution_snapshots(sol) } >= 2);

    let (mut v, mut e) = (0.0, 0.0);
    assert_eq!(unsafe { rv_reduced_volume(cfg, sol, RV_BACKWARDS, 0.3, &mut v, &mut e) }, RV_OK);
    assert!((v - 1.0).abs() < 5e-3, "{v}");
    assert_eq!(unsafe { rv_reduced_volume(cfg, sol, 7, 0.3, &mut v, ptr::null_mut()) }, RV_ERR_CONFIG);
    assert!(last_error().unwrap().contains("mode"));

    let (p, q) = ([1.0, 1.0], [2.0, 1.5]);
    let (mut a, mut l, mut r) = (0.0, 0.0, 0.0);
    let code = unsafe { rv_geodesic(cfg, sol, RV_BACKWARDS, p.as_ptr(), q.as_ptr(), 2, 1.5, &mut a, &mut l, &mut r) };
    assert_eq!(code, RV_OK);
    assert!((l - 1.25 / 2.0).abs() < 1e-9, "{l}");
    assert!(last_error().is_none());

    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut exit = -1;
    assert_eq!(unsafe { rv_run_experiment(cfg, d.as_ptr(), &mut exit) }, RV_OK);
    assert_eq!(exit, 0);
    assert!(dir.path().join("volume_backwards.csv").exists());
    unsafe {
        rv_solution_free(sol);
        rv_config_free(cfg);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/rvlab.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["rv_config_parse", "rv_evolve", "rv_reduced_volume", "rv_geodesic", "rv_run_experiment", "rv_last_error"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).status() else {
        return;
    };
    assert!(status.success());
}
