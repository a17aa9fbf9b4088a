use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use vista_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(vista_last_error()) }.to_string_lossy().into_owned()
}

fn sine_rows(len: usize, dims: usize, phase: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(len * dims);
    for t in 0..len {
        for c in 0..dims {
            v.push((t as f64 * 0.2 + c as f64 + phase).sin());
        }
    }
    v
}

struct Handles {
    cfg: *mut VistaConfig,
    ex: *mut VistaExtractor,
}

impl Handles {
    fn new() -> Self {
        let mut cfg = ptr::null_mut();
        let mut ex = ptr::null_mut();
        unsafe {
            assert_eq!(vista_config_new(&mut cfg), VistaStatus::Ok);
            let k = CString::new("window_size").unwrap();
            let v = CString::new("32").unwrap();
            assert_eq!(vista_config_set(cfg, k.as_ptr(), v.as_ptr()), VistaStatus::Ok);
            let spec = CString::new("seeded:0").unwrap();
            assert_eq!(vista_extractor_load(spec.as_ptr(), &mut ex), VistaStatus::Ok);
        }
        Handles { cfg, ex }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            vista_config_free(self.cfg);
            vista_extractor_free(self.ex);
        }
    }
}

#[test]
fn fit_save_load_score_round_trip() {
    let h = Handles::new();
    let train = sine_rows(128, 2, 0.0);
    let mut bank = ptr::null_mut();
    unsafe {
        assert_eq!(vista_fit(h.cfg, h.ex, train.as_ptr(), 128, 2, &mut bank), VistaStatus::Ok, "{}", last_error());
        // 4 windows of 2x2 patches, half kept
        assert_eq!(vista_bank_len(bank), 8);
        assert_eq!(vista_bank_dim(bank), 256 + 512);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("b.vstb").to_str().unwrap()).unwrap();
        assert_eq!(vista_bank_save(bank, path.as_ptr()), VistaStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(vista_bank_load(path.as_ptr(), &mut loaded), VistaStatus::Ok);
        assert_eq!(vista_bank_len(loaded), 8);

        let test = sine_rows(70, 2, 0.3);
        let mut written = 0usize;
        assert_eq!(
            vista_score(h.cfg, h.ex, loaded, test.as_ptr(), 70, 2, ptr::null_mut(), 0, &mut written),
            VistaStatus::BufferTooSmall
        );
        assert_eq!(written, 70);
        let mut scores = vec![f64::NAN; 70];
        assert_eq!(
            vista_score(h.cfg, h.ex, loaded, test.as_ptr(), 70, 2, scores.as_mut_ptr(), 70, &mut written),
            VistaStatus::Ok,
            "{}",
            last_error()
        );
        assert!(scores.iter().all(|s| s.is_finite() && *s >= 0.0));
        assert_eq!(last_error(), "");
        vista_bank_free(bank);
        vista_bank_free(loaded);
    }
}

#[test]
fn error_codes_and_messages() {
    let h = Handles::new();
    unsafe {
        let k = CString::new("window_size").unwrap();
        let v = CString::new("33").unwrap();
        // `set` parses; validation happens when the pipeline runs
        assert_eq!(vista_config_set(h.cfg, k.as_ptr(), v.as_ptr()), VistaStatus::Ok);
        let data = sine_rows(64, 1, 0.0);
        let mut bank = ptr::null_mut();
        assert_eq!(vista_fit(h.cfg, h.ex, data.as_ptr(), 64, 1, &mut bank), VistaStatus::Config);
        assert!(last_error().contains("window size 33"), "{}", last_error());

        let bogus = CString::new("bogus").unwrap();
        assert_eq!(vista_config_set(h.cfg, bogus.as_ptr(), v.as_ptr()), VistaStatus::Config);
        assert_eq!(vista_config_set(ptr::null_mut(), k.as_ptr(), v.as_ptr()), VistaStatus::NullPointer);

        let missing = CString::new("/nonexistent/bank.vstb").unwrap();
        assert_eq!(vista_bank_load(missing.as_ptr(), &mut bank), VistaStatus::Io);
        assert!(bank.is_null());
        assert_eq!(vista_bank_len(ptr::null()), 0);
    }
}

#[test]
fn short_series_and_digest_mismatch() {
    let h = Handles::new();
    unsafe {
        let data = sine_rows(20, 1, 0.0);
        let mut bank = ptr::null_mut();
        assert_eq!(vista_fit(h.cfg, h.ex, data.as_ptr(), 20, 1, &mut bank), VistaStatus::SeriesTooShort);

        let train = sine_rows(64, 1, 0.0);
        assert_eq!(vista_fit(h.cfg, h.ex, train.as_ptr(), 64, 1, &mut bank), VistaStatus::Ok);
        let k = CString::new("layers").unwrap();
        let v = CString::new("4").unwrap();
        assert_eq!(vista_config_set(h.cfg, k.as_ptr(), v.as_ptr()), VistaStatus::Ok);
        let mut written = 0;
        let mut out = vec![0.0; 64];
        assert_eq!(
            vista_score(h.cfg, h.ex, bank, train.as_ptr(), 64, 1, out.as_mut_ptr(), 64, &mut written),
            VistaStatus::DigestMismatch
        );
        assert_eq!(last_error(), "bank built with different configuration");
        vista_bank_free(bank);
    }
}

#[test]
fn metrics() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let (mut auc, mut f1, mut thr, mut p, mut r) = (0.0, 0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(vista_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc), VistaStatus::Ok);
        assert_eq!(auc, 0.75);
        assert_eq!(
            vista_optimal_f1(scores.as_ptr(), labels.as_ptr(), 4, &mut f1, &mut thr, &mut p, &mut r),
            VistaStatus::Ok
        );
        assert!((f1 - 0.8).abs() < 1e-12);
        assert_eq!(thr, 0.1);
        let ones = [1u8; 4];
        assert_eq!(vista_roc_auc(scores.as_ptr(), ones.as_ptr(), 4, &mut auc), VistaStatus::UndefinedMetric);
        assert_eq!(vista_roc_auc(ptr::null(), labels.as_ptr(), 4, &mut auc), VistaStatus::NullPointer);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(vista_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/vista.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "vista_config_new",
        "vista_config_set",
        "vista_config_free",
        "vista_extractor_load",
        "vista_fit",
        "vista_bank_save",
        "vista_bank_load",
        "vista_score",
        "vista_roc_auc",
        "vista_optimal_f1",
        "vista_last_error",
        "VISTA_STATUS_DIGEST_MISMATCH = 9",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    // compile-check with a C compiler when one is present
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
