use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use givens::cli::io::{read_matrix_csv, read_trace_tsv, write_matrix_csv, write_tensor_file};
use givens::manifold::seeded_rng;
use givens::tensor::SymmetricTensor3;
use nalgebra::DMatrix;
use rand::Rng;

fn givens() -> Command {
    Command::new(env!("CARGO_BIN_EXE_givens"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = givens().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_random(path: &Path, rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    write_matrix_csv(path, &m).unwrap();
    m
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn spca_without_penalty_keeps_objective_constant() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    let a = write_random(&input, 5, 6, 1);
    let out = dir.path().join("out");
    let (code, _, err) = run(&["spca", "--input", s(&input), "--gamma", "0", "--seed", "3", "--max-iters", "60", "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let total = a.norm_squared();
    for row in read_trace_tsv(&out.join("trace.tsv")).unwrap() {
        assert!((row.objective - total).abs() <= 1e-8 * total);
    }
    let metrics = json(out.join("metrics.json"));
    assert_eq!(metrics["schema_version"], 1);
    let z = read_matrix_csv(&out.join("loadings.csv"), false).unwrap();
    assert_eq!(z.shape(), (5, 6));
}

#[test]
fn missing_input_exits_2_and_names_the_path() {
    let (code, _, err) = run(&["spca", "--input", "/no/such/file.csv", "--gamma", "0.1", "--seed", "1"]);
    assert_eq!(code, 2);
    assert!(err.contains("/no/such/file.csv"));
}

#[test]
fn seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    write_random(&input, 3, 3, 2);
    let (code, _, _) = run(&["spca", "--input", s(&input), "--gamma", "0.1"]);
    assert_eq!(code, 2);
}

#[test]
fn degenerate_penalty_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    write_random(&input, 3, 3, 4);
    let (code, _, err) = run(&["spca", "--input", s(&input), "--gamma", "10", "--seed", "1", "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(code, 2);
    assert!(err.contains("gamma"));
}

#[test]
fn stream_of_m_samples_matches_batch() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    write_random(&input, 6, 4, 5);
    let batch = dir.path().join("batch");
    let stream = dir.path().join("stream");
    let (c1, _, e1) = run(&["spca", "--input", s(&input), "--gamma", "0.2", "--seed", "7", "--max-iters", "200", "--out-dir", s(&batch)]);
    let (c2, _, e2) = run(&[
        "spca-stream", "--input", s(&input), "--gamma", "0.2", "--seed", "7", "--components", "4", "--inner-iters", "200",
        "--out-dir", s(&stream),
    ]);
    assert_eq!((c1, c2), (0, 0), "{e1}{e2}");
    let a = json(batch.join("metrics.json"))["objective"].as_f64().unwrap();
    let b = json(stream.join("metrics.json"))["objective"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
}

#[test]
fn early_stop_consumes_exact_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("rows.csv");
    write_random(&input, 1000, 5, 6);
    let out = dir.path().join("o");
    let (code, _, err) = run(&[
        "spca-stream", "--input", s(&input), "--transpose", "--gamma", "0.1", "--seed", "1", "--components", "3",
        "--early-stop-frac", "0.14", "--out-dir", s(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(json(out.join("metrics.json"))["samples_consumed"], 140);
}

#[test]
fn stream_needs_enough_samples() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    write_random(&input, 4, 3, 7);
    let (code, _, _) = run(&["spca-stream", "--input", s(&input), "--gamma", "0.1", "--seed", "1", "--components", "5"]);
    assert_eq!(code, 2);
}

#[test]
fn tensor_synth_round_trip_and_modes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    let (code, stdout, err) = run(&["tensor", "--synth-lambdas", "1,1.25,1.5,1.75,2", "--seed", "11", "--out-dir", s(&synth)]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("residual"));
    let m = json(synth.join("metrics.json"));
    assert!(m["residual"].as_f64().unwrap() <= 1e-8);
    let file = synth.join("tensor.txt");
    let mut objectives = Vec::new();
    for mode in ["naive", "accelerated"] {
        let out = dir.path().join(mode);
        let (code, _, err) = run(&["tensor", "--input", s(&file), "--mode", mode, "--seed", "12", "--out-dir", s(&out)]);
        assert_eq!(code, 0, "{err}");
        objectives.push(json(out.join("metrics.json"))["objective"].as_f64().unwrap());
    }
    assert!((objectives[0] - objectives[1]).abs() <= 1e-9);
}

#[test]
fn zero_tensor_is_flagged_null() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.txt");
    write_tensor_file(&file, &SymmetricTensor3::zeros(3)).unwrap();
    let out = dir.path().join("o");
    let (code, _, err) = run(&["tensor", "--input", s(&file), "--seed", "1", "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let m = json(out.join("metrics.json"));
    assert!(m["null_directions"].as_array().unwrap().iter().all(|v| v == true));
    assert!(m["lambdas"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
}

#[test]
fn malformed_tensor_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.txt");
    fs::write(&file, "2\n1 0\n0 0\n0 oops\n0 0\n").unwrap();
    let (code, _, err) = run(&["tensor", "--input", s(&file), "--seed", "1", "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(code, 2);
    assert!(err.contains(":4:"), "{err}");
}

#[test]
fn asymmetric_tensor_is_symmetrized_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.txt");
    fs::write(&file, "2\n1 0.1 0 0\n0 0 0 1\n").unwrap();
    let out = dir.path().join("o");
    let (code, _, err) = run(&["tensor", "--input", s(&file), "--seed", "1", "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("warning"));
    assert_eq!(json(out.join("metrics.json"))["symmetrized"], true);
}

#[test]
fn gmm_rejects_bad_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(run(&["gmm", "--components", "6", "--dim", "5", "--seed", "1", "--out-dir", out]).0, 2);
    assert_eq!(run(&["gmm", "--components", "3", "--dim", "5", "--samples", "4", "--seed", "1", "--out-dir", out]).0, 2);
}

#[test]
fn gmm_separated_preset_clusters_well() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, stdout, err) = run(&[
        "gmm", "--components", "5", "--dim", "10", "--samples", "100000", "--preset", "separated", "--seed", "21",
        "--out-dir", s(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("NMI"));
    assert!(json(out.join("metrics.json"))["nmi"].as_f64().unwrap() >= 0.95);
    assert_eq!(json(out.join("model.json"))["weights"].as_array().unwrap().len(), 5);
}

#[test]
fn repeat_writes_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, _, err) = run(&["tensor", "--synth-lambdas", "1,2,3", "--seed", "5", "--repeat", "3", "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{err}");
    for k in 0..3 {
        assert_eq!(json(out.join(format!("run-{k}")).join("metrics.json"))["seed"], 5 + k);
    }
}
