//! C ABI over the `vista` detector.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `_free` function. Every fallible call returns a
//! [`VistaStatus`]; on failure, [`vista_last_error`] describes the most
//! recent error on the calling thread. Panics are caught and reported as
//! [`VistaStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use vista::{FeatureExtractor, MemoryBank, PipelineConfig, TimeSeries, VistaError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VistaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Data = 4,
    SeriesTooShort = 5,
    Io = 6,
    Weights = 7,
    BankFormat = 8,
    DigestMismatch = 9,
    UndefinedMetric = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Pipeline settings.
pub struct VistaConfig(PipelineConfig);

/// Frozen feature extractor.
pub struct VistaExtractor(FeatureExtractor);

/// Coreset memory bank.
pub struct VistaBank(MemoryBank);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(err: &VistaError) -> VistaStatus {
    match err {
        VistaError::Config(_) => VistaStatus::Config,
        VistaError::Data(_) => VistaStatus::Data,
        VistaError::SeriesTooShort { .. } => VistaStatus::SeriesTooShort,
        VistaError::Io { .. } => VistaStatus::Io,
        VistaError::Weights { .. } => VistaStatus::Weights,
        VistaError::BankFormat { .. } => VistaStatus::BankFormat,
        VistaError::DigestMismatch => VistaStatus::DigestMismatch,
        VistaError::UndefinedMetric(_) => VistaStatus::UndefinedMetric,
    }
}

struct Failure(VistaStatus, String);

impl From<VistaError> for Failure {
    fn from(e: VistaError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VistaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            VistaStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            VistaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(VistaStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(VistaStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn series(values: *const f64, len: usize, dims: usize) -> Result<TimeSeries, Failure> {
    let n = len.checked_mul(dims).ok_or_else(|| Failure(VistaStatus::Data, "len * dims overflows".into()))?;
    let v = slice(values, n, "values")?;
    Ok(TimeSeries::new("ffi", v.to_vec(), dims)?)
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn vista_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vista_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a configuration holding the defaults.
#[no_mangle]
pub unsafe extern "C" fn vista_config_new(out: *mut *mut VistaConfig) -> VistaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, VistaConfig(PipelineConfig::default()));
        Ok(())
    })
}

/// Sets one configuration key using the config-file syntax.
#[no_mangle]
pub unsafe extern "C" fn vista_config_set(cfg: *mut VistaConfig, key: *const c_char, value: *const c_char) -> VistaStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let key = string(key, "key")?;
        let value = string(value, "value")?;
        let mut next = cfg.0.clone();
        next.set(key, value)?;
        cfg.0 = next;
        Ok(())
    })
}

/// Reads a configuration from a `key = value` file.
#[no_mangle]
pub unsafe extern "C" fn vista_config_load(path: *const c_char, out: *mut *mut VistaConfig) -> VistaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = PipelineConfig::from_file(&PathBuf::from(string(path, "path")?))?;
        put(out, VistaConfig(cfg));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vista_config_free(cfg: *mut VistaConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Loads the extractor named by `spec`: `seeded:N` or a weight file path.
#[no_mangle]
pub unsafe extern "C" fn vista_extractor_load(spec: *const c_char, out: *mut *mut VistaExtractor) -> VistaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = string(spec, "spec")?.parse()?;
        put(out, VistaExtractor(vista::load_extractor(&spec)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vista_extractor_free(ex: *mut VistaExtractor) {
    if !ex.is_null() {
        drop(Box::from_raw(ex));
    }
}

/// Builds a memory bank from a row-major `len × dims` training series.
#[no_mangle]
pub unsafe extern "C" fn vista_fit(
    cfg: *const VistaConfig,
    extractor: *const VistaExtractor,
    values: *const f64,
    len: usize,
    dims: usize,
    out: *mut *mut VistaBank,
) -> VistaStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        let ex = borrow(extractor, "extractor")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let train = series(values, len, dims)?;
        put(out, VistaBank(vista::fit(&train, &cfg.0, &ex.0)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vista_bank_save(bank: *const VistaBank, path: *const c_char) -> VistaStatus {
    guard(|| {
        let bank = borrow(bank, "bank")?;
        vista::save_bank(&bank.0, &PathBuf::from(string(path, "path")?))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vista_bank_load(path: *const c_char, out: *mut *mut VistaBank) -> VistaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, VistaBank(vista::load_bank(&PathBuf::from(string(path, "path")?))?));
        Ok(())
    })
}

/// Number of vectors in the bank; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn vista_bank_len(bank: *const VistaBank) -> usize {
    bank.as_ref().map_or(0, |b| b.0.len())
}

/// Feature dimension of the bank; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn vista_bank_dim(bank: *const VistaBank) -> usize {
    bank.as_ref().map_or(0, |b| b.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn vista_bank_free(bank: *mut VistaBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Scores a row-major `len × dims` test series. Writes one score per scored
/// timestep, in time order, to `scores` (room for `capacity` values) and the
/// count to `written`. Padded positions are not written. If `capacity` is too
/// small, nothing is written, `written` receives the required count and the
/// call returns `BufferTooSmall`.
#[no_mangle]
pub unsafe extern "C" fn vista_score(
    cfg: *const VistaConfig,
    extractor: *const VistaExtractor,
    bank: *const VistaBank,
    values: *const f64,
    len: usize,
    dims: usize,
    scores: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> VistaStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        let ex = borrow(extractor, "extractor")?;
        let bank = borrow(bank, "bank")?;
        if written.is_null() {
            return Err(null("written"));
        }
        let test = series(values, len, dims)?;
        let observed = vista::score_series(&test, &bank.0, &ex.0, &cfg.0)?.observed();
        *written = observed.len();
        if observed.len() > capacity {
            return Err(Failure(
                VistaStatus::BufferTooSmall,
                format!("need room for {} scores, got {capacity}", observed.len()),
            ));
        }
        if !observed.is_empty() {
            if scores.is_null() {
                return Err(null("scores"));
            }
            ptr::copy_nonoverlapping(observed.as_ptr(), scores, observed.len());
        }
        Ok(())
    })
}

/// ROC-AUC of `scores` against `{0,1}` `labels`.
#[no_mangle]
pub unsafe extern "C" fn vista_roc_auc(scores: *const f64, labels: *const u8, len: usize, out: *mut f64) -> VistaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = vista::roc_auc(slice(scores, len, "scores")?, slice(labels, len, "labels")?, None)?;
        Ok(())
    })
}

/// Best point-wise F1 over strict thresholds, with its threshold and precision/recall.
#[no_mangle]
pub unsafe extern "C" fn vista_optimal_f1(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    f1: *mut f64,
    threshold: *mut f64,
    precision: *mut f64,
    recall: *mut f64,
) -> VistaStatus {
    guard(|| {
        if f1.is_null() || threshold.is_null() {
            return Err(null("f1/threshold"));
        }
        let r = vista::optimal_f1(slice(scores, len, "scores")?, slice(labels, len, "labels")?, None)?;
        *f1 = r.f1;
        *threshold = r.threshold;
        if !precision.is_null() {
            *precision = r.precision;
        }
        if !recall.is_null() {
            *recall = r.recall;
        }
        Ok(())
    })
}
