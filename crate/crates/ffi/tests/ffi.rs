use std::ffi::{CStr, CString};
use std::ptr;

use eit_dbar_ffi::*;

fn last_error() -> String {
    let p = eit_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_and_error_slot() {
    let v = unsafe { CStr::from_ptr(eit_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    eit_clear_error();
    assert!(eit_last_error_message().is_null());
}

#[test]
fn zero_scattering_reconstructs_background() {
    let n = 16;
    let re = vec![0.0; n * n];
    let im = vec![0.0; n * n];
    let mut t = ptr::null_mut();
    let mut img = ptr::null_mut();
    unsafe {
        assert_eq!(eit_scattering_new(n, 4.0, 3.0, re.as_ptr(), im.as_ptr(), &mut t), EitStatus::Ok);
        assert_eq!(eit_reconstruct(t, 0.7, 16, 0.0, &mut img), EitStatus::Ok);
        assert_eq!(eit_image_size(img), 16);
        let mut sigma = vec![0.0; 256];
        assert_eq!(eit_image_copy_sigma(img, sigma.as_mut_ptr(), 256), EitStatus::Ok);
        assert!(sigma.iter().all(|v| (v - 0.7).abs() < 1e-12));
        let mut small = vec![0.0; 10];
        assert_eq!(eit_image_copy_sigma(img, small.as_mut_ptr(), 10), EitStatus::BufferTooSmall);
        let (mut mr, mut mi) = (vec![0.0; 256], vec![0.0; 256]);
        assert_eq!(eit_image_copy_m0(img, mr.as_mut_ptr(), mi.as_mut_ptr(), 256), EitStatus::Ok);
        assert!(mr.iter().all(|v| (v - 1.0).abs() < 1e-12) && mi.iter().all(|v| v.abs() < 1e-12));
        eit_image_free(img);
        eit_scattering_free(t);
    }
}

#[test]
fn invalid_arguments_report_status_and_message() {
    let re = vec![0.0; 9];
    let mut t = ptr::null_mut();
    unsafe {
        // 3 is not a power of two.
        assert_eq!(eit_scattering_new(3, 4.0, 3.0, re.as_ptr(), re.as_ptr(), &mut t), EitStatus::Invalid);
        assert!(t.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(eit_scattering_new(4, 4.0, 3.0, ptr::null(), re.as_ptr(), &mut t), EitStatus::NullPointer);
        assert!(last_error().contains("re"));
        let mut img = ptr::null_mut();
        assert_eq!(eit_reconstruct(ptr::null(), 1.0, 16, 0.0, &mut img), EitStatus::NullPointer);
        let missing = CString::new("/nonexistent/pair.eitp").unwrap();
        let mut pair = ptr::null_mut();
        assert_eq!(eit_pair_read(missing.as_ptr(), &mut pair), EitStatus::Io);
        assert_eq!(eit_pair_generate(7, 0, 0, ptr::null(), &mut pair), EitStatus::Invalid);
        assert!(last_error().contains("style"));
        // Free functions accept NULL.
        eit_pair_free(ptr::null_mut());
        eit_image_free(ptr::null_mut());
        eit_scattering_free(ptr::null_mut());
        assert_eq!(eit_pair_size(ptr::null()), 0);
    }
}

#[test]
fn generate_write_read_and_evaluate_pair() {
    let cfg = r#"{
        "style": "kit4", "count": 1, "master_seed": 0, "first_index": 0,
        "sim_k": {"n": 16, "half_width": 4.0}, "radius_range": [3.0, 3.0],
        "out_k": 32, "thresh": 24.0, "z_grid": 32,
        "beltrami": {"n": 64, "half_width": 2.1, "krylov": {"tol": 1e-6, "restart": 30, "max_iter": 500}},
        "dbar": {"tol": 1e-6, "restart": 30, "max_iter": 500},
        "max_retries": 3
    }"#;
    let cfg = CString::new(cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("p.eitp").to_str().unwrap()).unwrap();
    unsafe {
        let mut pair = ptr::null_mut();
        let status = eit_pair_generate(1, 5, 0, cfg.as_ptr(), &mut pair);
        assert_eq!(status, EitStatus::Ok, "{}", last_error());
        assert_eq!(eit_pair_style(pair), 1);
        let n = eit_pair_size(pair);
        assert_eq!(n, 32);
        assert_eq!(eit_pair_write(pair, path.as_ptr()), EitStatus::Ok);

        let mut back = ptr::null_mut();
        assert_eq!(eit_pair_read(path.as_ptr(), &mut back), EitStatus::Ok);
        assert_eq!(eit_pair_seed(back), eit_pair_seed(pair));
        let mut truth = vec![0.0; n * n];
        let mut recon = vec![0.0; n * n];
        let mut recon2 = vec![0.0; n * n];
        assert_eq!(eit_pair_copy(back, EitField::Truth, truth.as_mut_ptr(), n * n), EitStatus::Ok);
        assert_eq!(eit_pair_copy(back, EitField::Recon, recon.as_mut_ptr(), n * n), EitStatus::Ok);
        assert_eq!(eit_pair_copy(pair, EitField::Recon, recon2.as_mut_ptr(), n * n), EitStatus::Ok);
        assert_eq!(recon, recon2);

        let mut m = EitMetrics::default();
        assert_eq!(eit_evaluate(truth.as_ptr(), truth.as_ptr(), n, false, &mut m), EitStatus::Ok);
        assert!((m.ssim - 1.0).abs() < 1e-12 && m.rel_l1 == 0.0 && m.rel_l2 == 0.0);
        assert_eq!(eit_evaluate(recon.as_ptr(), truth.as_ptr(), n, true, &mut m), EitStatus::Ok);
        assert!(m.rel_l2 > 0.0 && m.rel_l2 < 60.0 && m.ssim < 1.0);
        eit_pair_free(back);
        eit_pair_free(pair);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = crate_dir.join("include/eit_dbar.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["eit_reconstruct", "eit_pair_read", "eit_evaluate", "EIT_STATUS_NUMERICAL", "eit_last_error_message"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "eit_dbar.h"
int main(void) {
    double re[256] = {0}, im[256] = {0};
    EitScattering *t = NULL;
    EitImage *img = NULL;
    if (eit_scattering_new(16, 4.0, 3.0, re, im, &t) != EIT_STATUS_OK) return 1;
    if (eit_reconstruct(t, 2.0, 16, 0.0, &img) != EIT_STATUS_OK) return 2;
    double s[256];
    if (eit_image_copy_sigma(img, s, 256) != EIT_STATUS_OK) return 3;
    if (s[10] < 1.999 || s[10] > 2.001) return 4;
    if (eit_reconstruct(NULL, 2.0, 16, 0.0, &img) != EIT_STATUS_NULL_POINTER) return 5;
    if (strstr(eit_last_error_message(), "scattering") == NULL) return 6;
    eit_image_free(img);
    eit_scattering_free(t);
    printf("%s\n", eit_version());
    return 0;
}
"#,
    )
    .unwrap();
    // Test binaries live in target/<profile>/deps; the static library sits one level up.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    let lib = lib_dir.join("libeit_dbar_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let bin = dir.path().join("smoke");
    let out = std::process::Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .output()
        .expect("C compiler runs");
    assert!(out.status.success(), "cc failed: {}", String::from_utf8_lossy(&out.stderr));
    let run = std::process::Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "smoke program exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
