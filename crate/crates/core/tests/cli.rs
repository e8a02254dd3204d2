use std::path::Path;
use std::process::{Command, Output};

use sdmd::io::matrix_file::load_matrix;

fn sdmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdmd"))
        .args(args)
        .output()
        .expect("run sdmd")
}

fn ok(args: &[&str]) -> Output {
    let out = sdmd(args);
    assert!(
        out.status.success(),
        "sdmd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn planted_dmd_recovers_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("p.sdmd");
    let out = dir.path().join("dmd");
    ok(&["gen", "planted-linear", "--spectrum", "0.9,0.5", "--frames", "14", "--output", s(&data)]);
    ok(&["dmd", "--window", "12", "--input", s(&data), "--output", s(&out)]);
    let text = std::fs::read_to_string(out.join("eigenvalues.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,index,re,im,abs"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    // windows ending at frames 11, 12, 13, two eigenvalues each
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let want = if r[1] == 0.0 { 0.9 } else { 0.5 };
        assert!((r[2] - want).abs() < 1e-10 && r[3].abs() < 1e-10, "{r:?}");
    }
    let (h, modes) = load_matrix::<f64>(&out.join("modes.sdmd")).unwrap();
    assert_eq!((h.rows, h.cols), (64, 4));
    assert_eq!(modes.len(), 4);
}

#[test]
fn single_thread_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("p.sdmd");
    ok(&["gen", "planted-linear", "--spectrum", "1.0,0.8:0.5", "--n", "500", "--frames", "30", "--output", s(&data)]);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&["dmd", "--window", "10", "--threads", "1", "--input", s(&data), "--output", s(&out)]);
        outputs.push((
            std::fs::read(out.join("eigenvalues.csv")).unwrap(),
            std::fs::read(out.join("modes.sdmd")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn backsub_scores_moving_blob() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    let out = dir.path().join("out");
    ok(&["gen", "moving-blob", "--width", "40", "--height", "30", "--frames", "50", "--seed", "2", "--output", s(&frames)]);
    ok(&[
        "backsub", "--window", "30", "--input", s(&frames), "--output", s(&out),
        "--ground-truth", s(&frames.join("truth")),
    ]);
    assert_eq!(std::fs::read_dir(out.join("mask")).unwrap().count(), 50);
    assert_eq!(std::fs::read_dir(out.join("foreground")).unwrap().count(), 50);
    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame,recall,precision,f_measure,psnr"));
    let f: Vec<f64> = lines.map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(f.len(), 50);
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    assert!(mean > 0.85, "mean F {mean}");
}

#[test]
fn dct_ingestion_keeps_singular_values() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    ok(&["gen", "moving-blob", "--width", "16", "--height", "12", "--frames", "12", "--output", s(&frames)]);
    let raw = dir.path().join("raw.csv");
    let dct = dir.path().join("dct.csv");
    ok(&["svd", "--window", "8", "--input", s(&frames), "--output", s(&raw)]);
    ok(&["svd", "--window", "8", "--transform", "dct", "--input", s(&frames), "--output", s(&dct)]);
    let parse = |p: &Path| -> Vec<f64> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect()
    };
    let (a, b) = (parse(&raw), parse(&dct));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-10 * a[0], "{x} vs {y}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdmd(&["svd", "--input", "/nonexistent/x.sdmd", "--output", s(&dir.path().join("o.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(sdmd(&["--no-such-flag"]).status.code(), Some(1));

    // an all-zero stream cannot be decomposed
    let zeros = dir.path().join("zeros");
    ok(&["gen", "constant", "--value", "0", "--width", "4", "--height", "4", "--frames", "5", "--output", s(&zeros)]);
    let out = sdmd(&["svd", "--window", "3", "--input", s(&zeros), "--output", s(&dir.path().join("z.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero"));

    let out = sdmd(&["dmd", "--window", "10", "--input", s(&zeros), "--output", s(&dir.path().join("d"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_writes_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = ok(&[
        "bench", "--algos", "svd,backsub", "--ns", "2000", "--widths", "5", "--steps", "2",
        "--threads", "1", "--output", s(&csv),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("algo,mode,n,m,step,seconds"));
    assert_eq!(lines.count(), 2 * 2 * 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("svd n=2000 m=5 speedup"));
}
