use std::path::{Path, PathBuf};

use vista::data_io::{benchmark, DataFormat, DatasetManifest, BENCHMARKS};

fn datasets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets")
}

#[test]
fn shipped_manifests_agree_with_benchmark_table() {
    for (file, files_per_split) in [
        ("msl.manifest", 1),
        ("smap.manifest", 1),
        ("smd.manifest", 28),
        ("psm.manifest", 1),
        ("swat.manifest", 1),
    ] {
        let m = DatasetManifest::from_file(&datasets_dir().join(file)).unwrap();
        let b = benchmark(&m.name).unwrap_or_else(|| panic!("{file}: unknown benchmark {}", m.name));
        assert_eq!(m.expected_dims, Some(b.dims), "{file}");
        assert_eq!(m.expected_counts, Some((b.train_len, b.test_len)), "{file}");
        let ratio = m.expected_anomaly_ratio.unwrap();
        assert!((ratio - b.anomaly_ratio).abs() < 1e-12, "{file}");
        assert_eq!(m.train_paths.len(), files_per_split, "{file}");
        assert_eq!(m.test_paths.len(), files_per_split, "{file}");
        assert_eq!(m.label_paths.len(), files_per_split, "{file}");
    }
    assert_eq!(BENCHMARKS.len(), 5);
}

#[test]
fn psm_selects_columns_and_label_column() {
    let m = DatasetManifest::from_file(&datasets_dir().join("psm.manifest")).unwrap();
    assert_eq!(m.format, DataFormat::Csv);
    assert_eq!(m.columns.as_ref().unwrap().len(), 25);
    assert_eq!(m.label_column, Some(1));
}

#[test]
fn missing_data_is_an_io_error() {
    let m = DatasetManifest::from_file(&datasets_dir().join("msl.manifest")).unwrap();
    if m.train_paths[0].exists() {
        return;
    }
    let err = vista::data_io::load_series(&m).unwrap_err();
    assert!(matches!(err, vista::VistaError::Io { .. }), "{err}");
}
