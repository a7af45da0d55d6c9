//! Exercise the C ABI from Rust and from a C program linked against the
//! static library.

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use snspdkit_ffi::*;

fn last_error() -> String {
    let p = snspd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(snspd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let s = unsafe { snspd_config_default(ptr::null_mut()) };
    assert_eq!(s, SnspdStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut p = 0.0;
    let s = unsafe { snspd_fp_loss_from_scan(ptr::null(), ptr::null(), 4, 0.14, 2.3, ptr::null_mut()) };
    assert_eq!(s, SnspdStatus::NullPointer);
    assert_eq!(unsafe { snspd_click_probability(1.0, 0.5, &mut p) }, SnspdStatus::Ok);
    assert!(snspd_last_error_message().is_null());
}

#[test]
fn click_probability_and_invalid_input() {
    let mut p = 0.0;
    assert_eq!(unsafe { snspd_click_probability(2.0, 0.25, &mut p) }, SnspdStatus::Ok);
    assert!((p - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
    assert_eq!(unsafe { snspd_click_probability(1.0, 1.5, &mut p) }, SnspdStatus::InvalidArgument);
    assert!(!last_error().is_empty());
}

#[test]
fn gain_like_contrast_is_numerical() {
    let mut est = SnspdLossEstimate::default();
    // R eta above R has no physical loss.
    let s = unsafe { snspd_fp_loss_from_contrast(0.9, 0.1, 2.3, &mut est) };
    assert_eq!(s, SnspdStatus::Numerical);
    assert!(last_error().contains("gain-like"));
}

#[test]
fn simulated_fringe_round_trips_through_fit() {
    let n = 512;
    let (mut phase, mut power) = (vec![0.0; n], vec![0.0; n]);
    let s = unsafe { snspd_simulate_fringe(0.2, 0.1422, 2.3, n, 0.0, 7, phase.as_mut_ptr(), power.as_mut_ptr()) };
    assert_eq!(s, SnspdStatus::Ok);
    let mut est = SnspdLossEstimate::default();
    let s = unsafe { snspd_fp_loss_from_scan(phase.as_ptr(), power.as_ptr(), n, 0.1422, 2.3, &mut est) };
    assert_eq!(s, SnspdStatus::Ok, "{}", last_error());
    assert!((est.alpha_db_per_cm - 0.2).abs() < 1e-6, "{est:?}");
}

#[test]
fn jitter_decomposition() {
    let mut d = 0.0;
    let comps = [16.0];
    assert_eq!(unsafe { snspd_jitter_decompose(20.0, comps.as_ptr(), 1, &mut d) }, SnspdStatus::Ok);
    assert!((d - 12.0).abs() < 1e-12);
    assert_eq!(unsafe { snspd_jitter_decompose(10.0, comps.as_ptr(), 1, &mut d) }, SnspdStatus::InvalidArgument);
}

#[test]
fn bad_toml_is_rejected() {
    let mut cfg = ptr::null_mut();
    let text = CString::new("seed = \"x\"").unwrap();
    let s = unsafe { snspd_config_from_toml(text.as_ptr(), &mut cfg) };
    assert_ne!(s, SnspdStatus::Ok);
    assert!(cfg.is_null());
    let text = CString::new("no_such_key = 1").unwrap();
    assert_ne!(unsafe { snspd_config_from_toml(text.as_ptr(), &mut cfg) }, SnspdStatus::Ok);
}

#[test]
fn mode_handle_lifecycle() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { snspd_config_default(&mut cfg) }, SnspdStatus::Ok);
    let mut mode = ptr::null_mut();
    let s = unsafe { snspd_mode_solve(cfg, SnspdPolarization::Te, &mut mode) };
    assert_eq!(s, SnspdStatus::Ok, "{}", last_error());
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { snspd_mode_n_eff(mode, &mut re, &mut im) }, SnspdStatus::Ok);
    assert!((re - 2.21156).abs() < 1e-4, "{re}");
    let (mut rows, mut cols) = (0, 0);
    assert_eq!(unsafe { snspd_mode_shape(mode, &mut rows, &mut cols) }, SnspdStatus::Ok);
    assert_eq!(rows, 201);
    let mut buf = vec![0.0; rows * cols];
    assert_eq!(unsafe { snspd_mode_copy_field(mode, buf.as_mut_ptr(), buf.len() - 1) }, SnspdStatus::BufferTooSmall);
    assert_eq!(unsafe { snspd_mode_copy_field(mode, buf.as_mut_ptr(), buf.len()) }, SnspdStatus::Ok);
    assert!(buf.iter().any(|v| *v != 0.0));
    let mut ov = SnspdFiberOverlap::default();
    assert_eq!(unsafe { snspd_mode_fiber_overlap(mode, 10.4, &mut ov) }, SnspdStatus::Ok);
    assert!((ov.overlap - 0.9199).abs() < 1e-3, "{ov:?}");
    let (mut a, mut b) = (SnspdAbsorption::default(), SnspdAbsorption::default());
    assert_eq!(unsafe { snspd_mode_absorption(cfg, mode, f64::NAN, &mut a) }, SnspdStatus::Ok);
    assert_eq!(unsafe { snspd_mode_absorption(cfg, mode, 2.0 * 4.8, &mut b) }, SnspdStatus::Ok);
    assert!(a.absorption_per_device > 0.0 && b.absorption_per_device > a.absorption_per_device);
    unsafe {
        snspd_mode_free(mode);
        snspd_config_free(cfg);
        snspd_mode_free(ptr::null_mut());
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn find_cc() -> Option<String> {
    for cc in [std::env::var("CC").unwrap_or_default().as_str(), "cc", "gcc", "clang"] {
        if !cc.is_empty() && Command::new(cc).arg("--version").output().is_ok() {
            return Some(cc.to_string());
        }
    }
    None
}

#[test]
fn c_program_links_against_header_and_library() {
    let Some(cc) = find_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libsnspdkit_ffi.a");
    assert!(lib.is_file(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(manifest.join("tests").join("smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("ok"), "{stdout}");
}
