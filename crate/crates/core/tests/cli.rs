use std::path::Path;
use std::process::{Command, Output};

fn vista(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vista"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn vista_threads(args: &[&str], dir: &Path, threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vista"))
        .args(args)
        .current_dir(dir)
        .env("VISTA_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path) {
    ok(&vista(
        &["synth", "--seed", "2", "--length", "1024", "--variables", "2", "--window-hint", "32", "--out", "data"],
        dir,
    ));
}

#[test]
fn synth_fit_score_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    for f in ["train.csv", "test.csv", "test_labels.csv", "synth.manifest"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }
    let common = ["--window-size", "32", "--coreset-ratio", "0.25"];
    let fit = |out: &str, threads: &str| {
        let mut a = vec!["fit", "--manifest", "data/synth.manifest", "--out", out];
        a.extend(common);
        ok(&vista_threads(&a, d, threads));
    };
    fit("b1.vstb", "1");
    fit("b2.vstb", "3");
    assert_eq!(std::fs::read(d.join("b1.vstb")).unwrap(), std::fs::read(d.join("b2.vstb")).unwrap());

    let mut a = vec!["score", "--manifest", "data/synth.manifest", "--bank", "b1.vstb", "--out", "s.csv"];
    a.extend(common);
    ok(&vista(&a, d));
    let csv = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert!(csv.starts_with("t,score,padded\n"));
    assert_eq!(csv.lines().count(), 1 + 1024);

    // stdout form is byte-identical to the file form
    let mut a = vec!["score", "--test", "data/test.csv", "--bank", "b1.vstb"];
    a.extend(common);
    assert_eq!(ok(&vista(&a, d)), csv);

    let report = ok(&vista(
        &["eval", "--scores", "s.csv", "--labels", "data/test_labels.csv", "--out", "r.txt"],
        d,
    ));
    assert!(report.contains("roc_auc"), "{report}");
    let kv = std::fs::read_to_string(d.join("r.txt")).unwrap();
    assert!(kv.contains("f1 = "));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    assert_eq!(vista(&["fit"], d).status.code(), Some(1));
    assert_eq!(vista(&["--help"], d).status.code(), Some(0));
    let bad_window = vista(&["fit", "--train", "data/train.csv", "--out", "b", "--window-size", "33"], d);
    assert_eq!(bad_window.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_window.stderr).contains("[32, 64, 128, 256, 512, 1024]"));
    assert_eq!(vista(&["fit", "--train", "nope.csv", "--out", "b"], d).status.code(), Some(2));
    assert_eq!(
        vista_threads(&["fit", "--train", "data/train.csv", "--out", "b"], d, "zero").status.code(),
        Some(1)
    );

    ok(&vista(&["fit", "--train", "data/train.csv", "--out", "b.vstb", "--window-size", "32"], d));
    let mismatch = vista(&["score", "--test", "data/test.csv", "--bank", "b.vstb", "--window-size", "64"], d);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("bank built with different configuration"));

    std::fs::write(d.join("junk.vstb"), b"nope").unwrap();
    let junk = vista(&["score", "--test", "data/test.csv", "--bank", "junk.vstb"], d);
    assert_eq!(junk.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&junk.stderr).contains("byte 0"));
}

#[test]
fn decompose_reconstructs_input() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let csv = ok(&vista(&["decompose", "--input", "data/train.csv", "--window-size", "32"], d));
    let input: Vec<Vec<f64>> = std::fs::read_to_string(d.join("data/train.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let x = input[f[0] as usize][f[1] as usize];
        assert!((f[2] + f[3] + f[4] - x).abs() <= 1e-10 * x.abs().max(1.0), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 1024 * 2);
}

#[test]
fn render_writes_pngs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    ok(&vista(
        &["render", "--input", "data/train.csv", "--window-size", "64", "--max-windows", "2", "--out", "img"],
        d,
    ));
    let mut names: Vec<String> = std::fs::read_dir(d.join("img"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["w00000000_v000.png", "w00000000_v001.png", "w00000064_v000.png", "w00000064_v001.png"]);
    let bytes = std::fs::read(d.join("img").join(&names[0])).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
}

#[test]
fn gridsearch_reports_best_point() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let out = ok(&vista(
        &[
            "gridsearch",
            "--manifest",
            "data/synth.manifest",
            "--windows",
            "32,64",
            "--ratios",
            "0.1,0.5",
            "--knn-grid",
            "5,9",
            "--out",
            "grid.csv",
        ],
        d,
    ));
    assert!(out.contains("window_size = ") && out.contains("knn = "), "{out}");
    let grid = std::fs::read_to_string(d.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 2 * 2 * 2);
}
