use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use cscad::synthetic::correlated_groups;
use cscad_ffi::*;

fn c(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = cscad_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn fixture(dir: &Path) -> PathBuf {
    let ds = correlated_groups(240, 0.1, 4);
    ds.write(dir, "groups").unwrap();
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        "dataset = \"groups.csv\"\nschema = \"groups.schema.toml\"\noutput_dir = \"out\"\n\
         [recon]\nepochs = 3\nbatch_size = 32\n[disc]\nepochs = 3\nbatch_size = 32\n",
    )
    .unwrap();
    config
}

#[test]
fn full_run_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let config = c(&fixture(dir.path()));
    let mut handle: *mut CscadPipeline = ptr::null_mut();
    let overrides = CscadOverrides {
        has_seed: true,
        seed: 7,
        ..Default::default()
    };
    unsafe {
        assert_eq!(
            cscad_pipeline_open(config.as_ptr(), &overrides, &mut handle),
            CscadStatus::Ok
        );
        assert!(!handle.is_null());
        let mut report = CscadReport::default();
        assert_eq!(cscad_pipeline_run_all(handle, &mut report), CscadStatus::Ok);
        assert_eq!(report.tp + report.fp + report.fn_ + report.tn, 120);
        assert!((0.0..=1.0).contains(&report.f1));

        let mut flagged = 0u64;
        assert_eq!(cscad_pipeline_detect(handle, &mut flagged), CscadStatus::Ok);
        assert_eq!(flagged, report.tp + report.fp);
        cscad_pipeline_free(handle);
    }
    let out = dir.path().join("out");
    let mut from_files = CscadReport::default();
    let status = unsafe {
        cscad_evaluate_files(
            c(&out.join("predictions.csv")).as_ptr(),
            c(&out.join("truth.csv")).as_ptr(),
            &mut from_files,
        )
    };
    assert_eq!(status, CscadStatus::Ok);
    assert!(from_files.tp + from_files.fp + from_files.fn_ + from_files.tn == 120);
}

#[test]
fn stages_out_of_order_report_stale_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = c(&fixture(dir.path()));
    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(
            cscad_pipeline_open(config.as_ptr(), ptr::null(), &mut handle),
            CscadStatus::Ok
        );
        assert_eq!(cscad_pipeline_train_disc(handle), CscadStatus::StaleArtifact);
        assert!(last_error().contains("train-disc"), "{}", last_error());
        cscad_pipeline_free(handle);
    }
}

#[test]
fn bad_arguments() {
    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(
            cscad_pipeline_open(ptr::null(), ptr::null(), &mut handle),
            CscadStatus::NullPointer
        );
        assert!(last_error().contains("config_path"));
        let missing = CString::new("/nonexistent/cscad.toml").unwrap();
        assert_eq!(
            cscad_pipeline_open(missing.as_ptr(), ptr::null(), &mut handle),
            CscadStatus::Io
        );
        assert!(handle.is_null());
        assert_eq!(cscad_pipeline_mine(ptr::null_mut()), CscadStatus::NullPointer);
        assert_eq!(
            cscad_report_from_counts(1, 1, 1, 1, ptr::null_mut()),
            CscadStatus::NullPointer
        );
        cscad_pipeline_free(ptr::null_mut());
    }
}

#[test]
fn config_validation_errors_map_to_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(
        &config,
        "dataset = \"none.csv\"\nschema = \"none.toml\"\noutput_dir = \"o\"\n",
    )
    .unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { cscad_pipeline_open(c(&config).as_ptr(), ptr::null(), &mut handle) };
    assert_eq!(status, CscadStatus::InvalidConfig);
    assert!(last_error().contains("does not exist"));
}

#[test]
fn counts_to_report() {
    let mut r = CscadReport::default();
    assert_eq!(unsafe { cscad_report_from_counts(2, 1, 1, 0, &mut r) }, CscadStatus::Ok);
    for v in [r.precision, r.recall, r.f1] {
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }
    let v = unsafe { CStr::from_ptr(cscad_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// The generated header compiles as C and as C++ when a compiler exists.
#[test]
fn header_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("cscad.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ CscadReport r; return cscad_report_from_counts(1, 0, 0, 1, &r) == CSCAD_STATUS_OK ? 0 : 1; }}\n",
            header.display()
        ),
    )
    .unwrap();
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        match std::process::Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&src)
            .output()
        {
            Ok(out) => assert!(out.status.success(), "{cc}: {}", String::from_utf8_lossy(&out.stderr)),
            Err(_) => eprintln!("{cc} not found; skipping"),
        }
    }
}
