use std::ffi::{CStr, CString};
use std::ptr;

use combforge_ffi::*;

fn last_error() -> String {
    let p = cf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn mub_pair_through_the_abi() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { cf_collection_qubit_mub(2, 1, &mut h) }, CfStatus::Ok);
    assert!(cf_last_error_message().is_null());
    let (mut m, mut o) = (0usize, 0usize);
    assert_eq!(unsafe { cf_collection_shape(h, &mut m, &mut o) }, CfStatus::Ok);
    assert_eq!((m, o), (2, 2));
    let mut r = 0.0;
    assert_eq!(unsafe { cf_robustness(h, &mut r) }, CfStatus::Ok);
    assert!((r - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-6, "{r}");
    let mut w = 0.0;
    assert_eq!(unsafe { cf_convex_weight(h, &mut w) }, CfStatus::Ok);
    assert!((w - 1.0).abs() < 1e-6);
    let mut v = CfVerdict::Compatible;
    assert_eq!(unsafe { cf_is_compatible(h, &mut v) }, CfStatus::Ok);
    assert_eq!(v, CfVerdict::Incompatible);
    unsafe { cf_collection_free(h) };
}

#[test]
fn json_round_trip_and_reports() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { cf_collection_random(1, true, 2, 2, 5, &mut h) }, CfStatus::Ok);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cf_collection_to_json(h, &mut s) }, CfStatus::Ok);
    let mut h2 = ptr::null_mut();
    assert_eq!(unsafe { cf_collection_from_json(s, &mut h2) }, CfStatus::Ok);
    unsafe { cf_string_free(s) };

    let mut report = ptr::null_mut();
    assert_eq!(unsafe { cf_verify_theorem_json(h2, 1, 2, 3, &mut report) }, CfStatus::Ok);
    let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["theorem"], 1);
    assert_eq!(v["violations"], 0);
    unsafe { cf_string_free(report) };

    let mut cert = ptr::null_mut();
    assert_eq!(unsafe { cf_robustness_json(h2, &mut cert) }, CfStatus::Ok);
    unsafe { cf_string_free(cert) };
    unsafe { cf_collection_free(h) };
    unsafe { cf_collection_free(h2) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { cf_collection_qubit_mub(4, 1, &mut h) }, CfStatus::Validation);
    assert!(last_error().contains("mutually unbiased"));
    assert!(h.is_null());

    let bad = CString::new("{\"testers\": 3}").unwrap();
    assert_eq!(unsafe { cf_collection_from_json(bad.as_ptr(), &mut h) }, CfStatus::Format);
    assert_eq!(unsafe { cf_collection_from_json(ptr::null(), &mut h) }, CfStatus::NullPointer);

    let mut r = 0.0;
    assert_eq!(unsafe { cf_robustness(ptr::null(), &mut r) }, CfStatus::NullPointer);

    assert_eq!(unsafe { cf_collection_random(1, true, 5, 3, 0, &mut h) }, CfStatus::Ok);
    assert_eq!(unsafe { cf_robustness(h, &mut r) }, CfStatus::CapExceeded);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cf_verify_theorem_json(h, 7, 1, 0, &mut out) }, CfStatus::Format);
    unsafe { cf_collection_free(h) };
    unsafe { cf_collection_free(ptr::null_mut()) };
    unsafe { cf_string_free(ptr::null_mut()) };
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/combforge.h")).unwrap();
    for name in [
        "cf_version",
        "cf_last_error_message",
        "cf_collection_from_json",
        "cf_collection_qubit_mub",
        "cf_collection_random",
        "cf_collection_free",
        "cf_collection_shape",
        "cf_collection_to_json",
        "cf_robustness",
        "cf_convex_weight",
        "cf_is_compatible",
        "cf_robustness_json",
        "cf_verify_theorem_json",
        "cf_string_free",
        "CF_STATUS_CAP_EXCEEDED",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    // Syntax-check with a C compiler when one is installed.
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let probe = std::env::temp_dir().join(format!("combforge-header-{}.c", std::process::id()));
    std::fs::write(&probe, "#include \"combforge.h\"\nint main(void) { return cf_version() == 0; }\n").unwrap();
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", include])
        .arg(&probe)
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let _ = std::fs::remove_file(probe);
}
