//! C ABI over the detection pipeline.
//!
//! A pipeline is an opaque handle created from a TOML configuration file and
//! released with `cscad_pipeline_free`. Every fallible call returns a
//! `CscadStatus`; on failure the message is kept per thread and read with
//! `cscad_last_error`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cscad::metrics::{Confusion, EvalReport};
use cscad::pipeline::{evaluate_files, Overrides, Pipeline, PipelineConfig};
use cscad::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CscadStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Io = 4,
    InvalidData = 5,
    StaleArtifact = 6,
    Training = 7,
    Internal = 8,
    Panic = 9,
}

/// Evaluation summary. `fn_` counts missed anomalies.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CscadReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl From<&EvalReport> for CscadReport {
    fn from(r: &EvalReport) -> Self {
        let c = r.confusion;
        CscadReport {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            tp: c.tp as u64,
            fp: c.fp as u64,
            fn_: c.fn_ as u64,
            tn: c.tn as u64,
        }
    }
}

/// Switches layered over the configuration file. A zeroed struct changes
/// nothing; `negatives` applies only when it lies in (0, 1).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CscadOverrides {
    pub has_seed: bool,
    pub seed: u64,
    pub no_gcn: bool,
    pub no_sigma: bool,
    pub negatives: f64,
}

/// Opaque pipeline handle.
pub struct CscadPipeline {
    inner: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    // interior NULs would truncate the C string
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> CscadStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Io { .. } => CscadStatus::Io,
        Error::InvalidConfig(_) | Error::InvalidPolicy(_) | Error::InvalidSchema(_) => CscadStatus::InvalidConfig,
        Error::StaleArtifact { .. } | Error::Checkpoint(_) => CscadStatus::StaleArtifact,
        Error::NonFiniteLoss { .. }
        | Error::NonFiniteGradient(_)
        | Error::NonFiniteActivation(_)
        | Error::EmptyClass(_)
        | Error::EmptyTrainingSet => CscadStatus::Training,
        Error::Csv(_)
        | Error::MissingColumn(_)
        | Error::UnknownCategory { .. }
        | Error::UnparsableNumber { .. }
        | Error::MissingValue { .. }
        | Error::EmptyDataset
        | Error::DegenerateSplit { .. }
        | Error::SeriesTooShort { .. }
        | Error::WindowExceedsSeries { .. }
        | Error::TooFewSamples { .. }
        | Error::TooFewObservations(_)
        | Error::LengthMismatch(..)
        | Error::IdMismatch { .. } => CscadStatus::InvalidData,
        _ => CscadStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (CscadStatus, String)>) -> CscadStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CscadStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CscadStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (CscadStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CscadStatus, String) {
    (CscadStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (CscadStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CscadStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cscad_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn cscad_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and validates a configuration and opens a pipeline on it.
///
/// # Safety
/// `config_path` must be a NUL-terminated string. `overrides` may be null.
/// `out` must be writable; it receives a handle only on `Ok`.
#[no_mangle]
pub unsafe extern "C" fn cscad_pipeline_open(
    config_path: *const c_char,
    overrides: *const CscadOverrides,
    out: *mut *mut CscadPipeline,
) -> CscadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(config_path, "config_path")?;
        let mut config = PipelineConfig::load(&path).map_err(lib_err)?;
        if let Some(o) = overrides.as_ref() {
            config.apply(&Overrides {
                seed: o.has_seed.then_some(o.seed),
                no_gcn: o.no_gcn,
                no_sigma: o.no_sigma,
                negatives: (o.negatives > 0.0 && o.negatives < 1.0).then_some(o.negatives),
                ..Overrides::default()
            });
        }
        let inner = Pipeline::new(config).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CscadPipeline { inner }));
        Ok(())
    })
}

/// # Safety
/// `pipeline` is null or a handle from `cscad_pipeline_open` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cscad_pipeline_free(pipeline: *mut CscadPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// # Safety
/// `pipeline` must be a live handle used by one thread at a time.
unsafe fn stage(pipeline: *mut CscadPipeline, f: impl FnOnce(&mut Pipeline) -> Result<(), Error>) -> CscadStatus {
    guard(|| {
        let p = pipeline.as_mut().ok_or_else(|| null("pipeline"))?;
        f(&mut p.inner).map_err(lib_err)
    })
}

/// # Safety
/// `pipeline` must be a live handle used by one thread at a time.
#[no_mangle]
pub unsafe extern "C" fn cscad_pipeline_mine(pipeline: *mut CscadPipeline) -> CscadStatus {
    stage(pipeline, |p| p.mine().map(drop))
}

/// # Safety
/// `pipeline` must be a live handle used by one thread at a time.
#[no_mangle]
pub unsafe extern "C" fn cscad_pipeline_train_recon(pipeline: *mut CscadPipeline) -> CscadStatus {
    stage(pipeline, |p| p.train_recon().map(drop))
}

/// # Safety
/// `pipeline` must be a live handle used by one thread at a time.
#[no_mangle]
pub unsafe extern "C" fn cscad_pipeline_train_disc(pipeline: *mut CscadPipeline) -> CscadStatus {
    stage(pipeline, |p| p.train_disc().map(drop))
}

/// Scores the held-out split. `n_flagged` may be null.
///
/// # Safety
/// `pipeline` must be a live handle used by one thread at a time;
/// `n_flagged` is null or writable.
#[no_mangle]
pub unsafe extern "C" fn cscad_pipeline_detect(pipeline: *mut CscadPipeline, n_flagged: *mut u64) -> CscadStatus {
    stage(pipeline, |p| {
        let probs = p.detect()?;
        if let Some(n) = n_flagged.as_mut() {
            *n = probs.iter().filter(|&&x| cscad::disc::decide(x)).count() as u64;
        }
        Ok(())
    })
}

/// # Safety
/// `pipeline` must be a live handle used by one thread at a time; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn cscad_pipeline_evaluate(pipeline: *mut CscadPipeline, out: *mut CscadReport) -> CscadStatus {
    if out.is_null() {
        return guard(|| Err(null("out")));
    }
    stage(pipeline, |p| {
        *out = (&p.evaluate()?).into();
        Ok(())
    })
}

/// All five stages in order.
///
/// # Safety
/// As `cscad_pipeline_evaluate`.
#[no_mangle]
pub unsafe extern "C" fn cscad_pipeline_run_all(pipeline: *mut CscadPipeline, out: *mut CscadReport) -> CscadStatus {
    if out.is_null() {
        return guard(|| Err(null("out")));
    }
    stage(pipeline, |p| {
        *out = (&p.run_all()?).into();
        Ok(())
    })
}

/// Scores a predictions CSV against an id-aligned truth CSV.
///
/// # Safety
/// Both paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cscad_evaluate_files(
    predictions: *const c_char,
    truth: *const c_char,
    out: *mut CscadReport,
) -> CscadStatus {
    guard(|| {
        let p = path_arg(predictions, "predictions")?;
        let t = path_arg(truth, "truth")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = (&evaluate_files(&p, &t).map_err(lib_err)?).into();
        Ok(())
    })
}

/// Precision, recall and F1 from raw confusion counts.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cscad_report_from_counts(
    tp: u64,
    fp: u64,
    fn_: u64,
    tn: u64,
    out: *mut CscadReport,
) -> CscadStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = Confusion {
            tp: tp as usize,
            fp: fp as usize,
            fn_: fn_ as usize,
            tn: tn as usize,
        };
        *out = (&EvalReport::new(c)).into();
        Ok(())
    })
}
