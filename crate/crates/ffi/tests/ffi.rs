use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use netsynth_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ns_last_error()) }.to_string_lossy().into_owned()
}

fn fixture(name: &str) -> *mut NsSystem {
    let name = CString::new(name).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { ns_system_fixture(name.as_ptr(), &mut sys) }, NsStatus::Ok);
    assert!(!sys.is_null());
    sys
}

#[test]
fn synthesize_and_read_back() {
    let sys = fixture("ring-base");
    let (mut n_sub, mut n, mut nu) = (0, 0, 0);
    assert_eq!(unsafe { ns_system_dims(sys, &mut n_sub, &mut n, &mut nu) }, NsStatus::Ok);
    assert_eq!((n_sub, n, nu), (4, 2, 1));

    let mut res = ptr::null_mut();
    let opts = ns_options_default();
    assert_eq!(unsafe { ns_synthesize(sys, NsMode::Kron, &opts, &mut res) }, NsStatus::Ok, "{}", last_error());
    let (mut gc, mut gv) = (0.0, 0.0);
    assert_eq!(unsafe { ns_result_gamma(res, &mut gc, &mut gv) }, NsStatus::Ok);
    assert!(gv > 0.0 && gv <= gc * (1.0 + 1e-6), "{gv} {gc}");

    let mut kd = vec![0.0; 2];
    let mut ki = vec![0.0; 2];
    assert_eq!(unsafe { ns_result_gains(res, kd.as_mut_ptr(), ki.as_mut_ptr(), 1) }, NsStatus::BufferTooSmall);
    assert_eq!(unsafe { ns_result_gains(res, kd.as_mut_ptr(), ki.as_mut_ptr(), 2) }, NsStatus::Ok);

    let mut h = 0.0;
    assert_eq!(unsafe { ns_closed_loop_hinf(sys, kd.as_ptr(), ki.as_ptr(), &mut h) }, NsStatus::Ok);
    assert!((h - gv).abs() <= 1e-6 * gv, "{h} {gv}");
    let mut passed = 0;
    assert_eq!(unsafe { ns_verify(sys, kd.as_ptr(), ki.as_ptr(), gc, &mut passed) }, NsStatus::Ok);
    assert_eq!(passed, 1);
    assert_eq!(unsafe { ns_verify(sys, kd.as_ptr(), ki.as_ptr(), 0.5 * gv, &mut passed) }, NsStatus::Ok);
    assert_eq!(passed, 0);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ns_result_to_json(res, &mut json) }, NsStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("gamma_certified"));
    unsafe {
        ns_string_free(json);
        ns_result_free(res);
        ns_system_free(sys);
    }
}

#[test]
fn error_codes() {
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { ns_system_from_json(ptr::null(), &mut sys) }, NsStatus::NullPointer);
    assert!(sys.is_null());
    let bad = CString::new("{\"pattern\": [[0]]}").unwrap();
    assert_eq!(unsafe { ns_system_from_json(bad.as_ptr(), &mut sys) }, NsStatus::Parse);
    assert!(!last_error().is_empty());
    let unknown = CString::new("nope").unwrap();
    assert_eq!(unsafe { ns_system_fixture(unknown.as_ptr(), &mut sys) }, NsStatus::Validation);
    assert!(last_error().contains("nope"));

    let paper = fixture("paper-sec7");
    assert!(last_error().is_empty());
    let mut res = ptr::null_mut();
    let mut opts = ns_options_default();
    opts.gamma_hi = 1e3;
    assert_eq!(unsafe { ns_synthesize(paper, NsMode::Kron, &opts, &mut res) }, NsStatus::Infeasible);
    assert!(res.is_null());
    opts.bisect_tol = 2.0;
    assert_eq!(unsafe { ns_synthesize(paper, NsMode::Kron, &opts, &mut res) }, NsStatus::InvalidArgument);
    let mut passed = 0;
    let k = [0.0; 3];
    assert_eq!(unsafe { ns_verify(paper, k.as_ptr(), k.as_ptr(), -1.0, &mut passed) }, NsStatus::InvalidArgument);
    assert_eq!(unsafe { ns_verify(paper, ptr::null(), k.as_ptr(), 1.0, &mut passed) }, NsStatus::NullPointer);
    unsafe {
        ns_system_free(paper);
        ns_system_free(ptr::null_mut());
        ns_result_free(ptr::null_mut());
    }
}

#[test]
fn json_round_trip_through_c_strings() {
    let text = CString::new(
        r#"{"pattern": [[0,1,1],[1,0,1],[1,1,0]],
            "dims": {"n": 1, "n_u": 1, "n_w": 1, "n_z": 1},
            "A": {"d": [[-1.0]], "i": [[0.1]]},
            "B_u": {"d": [[1.0]]}, "B_w": {"d": [[1.0]]}, "C_z": {"d": [[1.0]]}}"#,
    )
    .unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { ns_system_from_json(text.as_ptr(), &mut sys) }, NsStatus::Ok, "{}", last_error());
    // modes −0.8 (λ = 2) and −1.1 (λ = −1); peak at ω = 0 is 1/0.8
    let z = [0.0];
    let mut h = 0.0;
    assert_eq!(unsafe { ns_closed_loop_hinf(sys, z.as_ptr(), z.as_ptr(), &mut h) }, NsStatus::Ok);
    assert!((h - 1.25).abs() < 1e-6, "{h}");
    unsafe { ns_system_free(sys) };
}

#[test]
fn header_is_valid_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = dir.join("netsynth.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["ns_synthesize", "ns_last_error", "ns_result_free", "NS_STATUS_INFEASIBLE", "typedef struct NsSystem NsSystem"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let src = std::env::temp_dir().join("netsynth_header_check.c");
    std::fs::write(&src, "#include \"netsynth.h\"\nint main(void) { NsOptions o = ns_options_default(); (void)o; return 0; }\n").unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(&dir).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler; header syntax not checked"),
    }
}
