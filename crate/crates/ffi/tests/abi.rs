use std::f64::consts::PI;
use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ciss_nv_ffi::*;

fn last_error() -> String {
    let p = ciss_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn state_round_trip() {
    let mut state = ptr::null_mut();
    unsafe {
        assert_eq!(ciss_state_new(PI / 4.0, 0.0, 1.0, &mut state), CissStatus::Ok);
        let mut occ = [0.0; 4];
        assert_eq!(ciss_state_occupations(state, occ.as_mut_ptr()), CissStatus::Ok);
        assert!((occ[1] - 1.0).abs() < 1e-12, "{occ:?}");
        let mut p = 0.0;
        assert_eq!(ciss_state_polarization(state, &mut p), CissStatus::Ok);
        assert!((p - 1.0).abs() < 1e-12);
        ciss_state_free(state);
    }
    assert!(ciss_last_error().is_null());
}

#[test]
fn invalid_lambda_reports_message() {
    let mut state = ptr::null_mut();
    let status = unsafe { ciss_state_new(0.0, 0.0, 1.5, &mut state) };
    assert_eq!(status, CissStatus::InvalidParameter);
    assert!(state.is_null());
    assert!(last_error().contains("lambda"));
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        assert_eq!(ciss_state_new(0.0, 0.0, 1.0, ptr::null_mut()), CissStatus::NullPointer);
        let mut p = 0.0;
        assert_eq!(ciss_state_polarization(ptr::null(), &mut p), CissStatus::NullPointer);
        ciss_state_free(ptr::null_mut());
        ciss_sweep_free(ptr::null_mut());
        assert_eq!(ciss_sweep_len(ptr::null()), 0);
    }
}

#[test]
fn sweep_handles() {
    let omega = [0.0, 2.0 * PI * 50e6];
    unsafe {
        let mut state = ptr::null_mut();
        assert_eq!(ciss_state_new(PI / 4.0, 0.0, 1.0, &mut state), CissStatus::Ok);
        let mut sweep = ptr::null_mut();
        let status = ciss_decoupling_sweep(
            state,
            2e-9,
            0.04,
            0.0,
            CissSequence::Fslg,
            omega.as_ptr(),
            omega.len(),
            0.3e-6,
            0.05e-9,
            &mut sweep,
        );
        assert_eq!(status, CissStatus::Ok, "{}", last_error());
        assert_eq!(ciss_sweep_len(sweep), 2);
        let mut p = [0.0; 2];
        for (i, v) in p.iter_mut().enumerate() {
            assert_eq!(ciss_sweep_pbar(sweep, i, v), CissStatus::Ok);
        }
        assert!(p[0].abs() < 0.05 && (p[1] - 1.0 / 3.0).abs() < 0.03, "{p:?}");
        let mut occ = [0.0; 4];
        assert_eq!(ciss_sweep_occupations(sweep, 1, occ.as_mut_ptr()), CissStatus::Ok);
        assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert_eq!(ciss_sweep_pbar(sweep, 2, &mut p[0]), CissStatus::OutOfRange);
        ciss_sweep_free(sweep);
        ciss_state_free(state);
    }
}

#[test]
fn odmr_contrast_has_a_dip() {
    let detunings: Vec<f64> = (-20..=20).map(|k| 2.0 * PI * 20e3 * k as f64).collect();
    let mut contrast = vec![0.0; detunings.len()];
    let status = unsafe {
        ciss_odmr_simulate(
            PI / 4.0,
            0.0,
            1.0,
            5e-9,
            2e-9,
            0.04,
            2.0 * PI * 50e6,
            4e-6,
            detunings.as_ptr(),
            detunings.len(),
            contrast.as_mut_ptr(),
        )
    };
    assert_eq!(status, CissStatus::Ok);
    let min = contrast.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min < 0.5 && contrast.iter().all(|c| (0.0..=1.0 + 1e-9).contains(c)));
}

#[test]
fn surface_entry_points() {
    let (mut shift, mut lg) = (0.0, 0.0);
    let status = unsafe {
        ciss_monolayer_shift(
            CissTermination::T111,
            5e-9,
            50e-9,
            1e-9,
            2e-9,
            0.15e18,
            &mut shift,
            &mut lg,
        )
    };
    assert_eq!(status, CissStatus::Ok);
    assert!((shift / lg - 3f64.sqrt()).abs() < 1e-12);
    let (mut mean, mut spread) = (0.0, 0.0);
    let status = unsafe { ciss_anchor_density(5e18, 2e-9, 1e-14, 20, 7, &mut mean, &mut spread) };
    assert_eq!(status, CissStatus::Ok);
    assert!(mean > 0.1e18 && mean < 0.2e18, "{mean}");
    let status = unsafe { ciss_anchor_density(5e18, 2e-9, 1e-14, 0, 7, &mut mean, &mut spread) };
    assert_eq!(status, CissStatus::InvalidParameter);
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("ciss_nv.h")
}

fn have_cc() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

#[test]
fn header_is_valid_c() {
    let text = std::fs::read_to_string(header()).expect("header generated by build.rs");
    for f in [
        "ciss_state_new",
        "ciss_decoupling_sweep",
        "ciss_odmr_simulate",
        "ciss_last_error",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    if !have_cc() {
        eprintln!("no C compiler; skipping syntax check");
        return;
    }
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(header())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_against_static_library() {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libciss_nv_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("no C compiler or static library; skipping link check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "ciss_nv.h"
int main(void) {
    CissState *s = NULL;
    double p = 0.0;
    if (ciss_state_new(0.7853981633974483, 0.0, 1.0, &s) != CISS_STATUS_OK) return 1;
    if (ciss_state_polarization(s, &p) != CISS_STATUS_OK) return 2;
    ciss_state_free(s);
    if (ciss_state_new(0.0, 0.0, 2.0, &s) != CISS_STATUS_INVALID_PARAMETER) return 3;
    if (ciss_last_error() == NULL) return 4;
    printf("%.6f\n", p);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "1.000000");
}
