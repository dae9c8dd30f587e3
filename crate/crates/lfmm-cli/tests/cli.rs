//! End-to-end tests of the `lfmm` binary: exit codes, output files, and
//! determinism of everything except the metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lfmm")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lfmm-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

const SMALL_MODEL: &str = r#"
[model]
p = 40
s = [1.5, 0.5]
rho = 0.5
v_construction = "diag_scaled_haar"
diag_scale = 2.0
noise_laws = ["gaussian"]
seed = 3
"#;

#[test]
fn solve_writes_report_and_sweep() {
    let dir = tmp_dir("solve");
    let cfg = write_config(
        &dir,
        "exp.toml",
        &format!("loss = \"square\"\nlambda = 1.0\nn = 120\ngh_points = 24\n{SMALL_MODEL}"),
    );
    let out = dir.join("out");
    let res = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fixed_point.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], serde_json::Value::Bool(true));
    assert!(report["theta"].as_f64().unwrap() > 0.0);
    assert!(report["generalization_accuracy"].as_f64().unwrap() > 0.5);
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 2);
    assert!(sweep.starts_with("lambda,theta"));
    assert!(out.join("run_meta.json").exists());
}

#[test]
fn sweep_produces_monotone_file_names() {
    let dir = tmp_dir("sweep");
    let cfg = write_config(
        &dir,
        "exp.toml",
        &format!(
            "loss = \"square\"\nlambda = [0.25, 0.5, 1.0, 2.0, 4.0]\nn = 120\ngh_points = 24\n{SMALL_MODEL}"
        ),
    );
    let out = dir.join("out");
    let res = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    for i in 0..5 {
        assert!(out.join(format!("fixed_point_{i:03}.json")).exists());
    }
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 6);
}

#[test]
fn invalid_spec_fails_with_error_json() {
    let dir = tmp_dir("invalid");
    // a rank-deficient V: first and last columns identical
    let mut rows = String::new();
    for i in 0..6 {
        let mut row: Vec<String> = (0..6)
            .map(|j| if i == j { "1.0".to_string() } else { "0.0".to_string() })
            .collect();
        row[5] = row[0].clone(); // duplicate the informative column
        rows.push_str(&row.join(","));
        rows.push('\n');
    }
    fs::write(dir.join("v.csv"), rows).unwrap();
    let cfg = write_config(
        &dir,
        "exp.toml",
        r#"
loss = "square"
lambda = 1.0
n = 30

[model]
p = 6
s = [1.0]
rho = 0.5
v_construction = "explicit_matrix_file"
matrix_file = "v.csv"
noise_laws = ["gaussian"]
"#,
    );
    let out = dir.join("out");
    let res = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&res.stderr).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "invalid_spec");
    let violations = err["error"]["violations"].as_array().unwrap();
    let text = violations
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect::<Vec<_>>()
        .join(" ");
    assert!(text.contains("rank"), "violations: {text}");
    assert!(text.contains("orthogonality"), "violations: {text}");
}

#[test]
fn simulate_writes_joined_table() {
    let dir = tmp_dir("simulate");
    let cfg = write_config(
        &dir,
        "exp.toml",
        &format!(
            "loss = \"square\"\nlambda = 1.0\nn = 120\nn_test = 2000\ntrials = 6\ngh_points = 24\nseed = 5\n{SMALL_MODEL}"
        ),
    );
    let out = dir.join("out");
    let res = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("lambda,theory_acc,emp_mean,emp_std,z_score"));
    let data_line = sweep.lines().nth(1).unwrap();
    let cols: Vec<f64> = data_line.split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(cols.len(), 5);
    // theory and empirics agree loosely even at p = 40
    assert!((cols[1] - cols[2]).abs() < 0.05);
    let trials = fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 7);
}

#[test]
fn histogram_outputs_share_a_grid() {
    let dir = tmp_dir("hist");
    let cfg = write_config(
        &dir,
        "exp.toml",
        &format!(
            "loss = \"square\"\nlambda = 1.0\nn = 150\nn_test = 20000\ngh_points = 24\nhist_bins = 50\nseed = 2\n{SMALL_MODEL}"
        ),
    );
    let out = dir.join("out");
    let res = run(&["histogram", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let hist = fs::read_to_string(out.join("hist_empirical.csv")).unwrap();
    let dens = fs::read_to_string(out.join("density_theory.csv")).unwrap();
    assert_eq!(hist.lines().count(), 51);
    assert_eq!(dens.lines().count(), 51);
    // same score grid in both files
    for (h, d) in hist.lines().skip(1).zip(dens.lines().skip(1)) {
        assert_eq!(h.split(',').next(), d.split(',').next());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("histogram.json")).unwrap()).unwrap();
    let ks = summary["ks_distance"].as_f64().unwrap();
    assert!(ks > 0.0 && ks < 0.1, "ks = {ks}");
}

#[test]
fn histogram_rejects_empty_test_set_before_compute() {
    let dir = tmp_dir("hist-empty");
    let cfg = write_config(
        &dir,
        "exp.toml",
        &format!("loss = \"square\"\nlambda = 1.0\nn = 150\nn_test = 0\n{SMALL_MODEL}"),
    );
    let res = run(&["histogram", "--config", cfg.to_str().unwrap()]);
    assert!(!res.status.success());
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&res.stderr).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn universality_verdicts_on_rademacher_spec() {
    let dir = tmp_dir("universality");
    let model = SMALL_MODEL.replace(
        "noise_laws = [\"gaussian\"]",
        "noise_laws = [\"rademacher\", \"gaussian\"]",
    );
    let base = format!(
        "lambda = 0.5\nn = 120\nn_test = 2000\ntrials = 6\ngh_points = 24\nseed = 4\n{model}"
    );

    let cfg = write_config(&dir, "sq.toml", &format!("loss = \"square\"\n{base}"));
    let out = dir.join("sq");
    let res = run(&["universality", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("universality.json")).unwrap()).unwrap();
    assert_eq!(v["audit"]["classifier_universal"], true);
    assert_eq!(v["audit"]["in_distribution_universal"], false);
    assert!(v["cross_test"]["z_score"].as_f64().unwrap() < 3.0);

    let cfg = write_config(&dir, "log.toml", &format!("loss = \"logistic\"\n{base}"));
    let out = dir.join("log");
    let res = run(&["universality", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("universality.json")).unwrap()).unwrap();
    assert_eq!(v["audit"]["classifier_universal"], false);
}

#[test]
fn all_gaussian_spec_is_fully_universal() {
    let dir = tmp_dir("universality-gauss");
    let cfg = write_config(
        &dir,
        "exp.toml",
        &format!(
            "loss = \"logistic\"\nlambda = 0.5\nn = 120\nn_test = 1000\ntrials = 4\ngh_points = 24\n{SMALL_MODEL}"
        ),
    );
    let out = dir.join("out");
    let res = run(&["universality", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("universality.json")).unwrap()).unwrap();
    assert_eq!(v["audit"]["classifier_universal"], true);
    assert_eq!(v["audit"]["in_distribution_universal"], true);
}

#[test]
fn reruns_are_byte_identical_except_metadata() {
    let dir = tmp_dir("determinism");
    let cfg = write_config(
        &dir,
        "exp.toml",
        &format!(
            "loss = \"logistic\"\nlambda = [0.5, 1.0]\nn = 100\nn_test = 500\ntrials = 3\ngh_points = 24\nseed = 9\n{SMALL_MODEL}"
        ),
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let res = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            "2",
        ]);
        assert!(res.status.success());
    }
    for name in [
        "sweep.csv",
        "trials_000.csv",
        "trials_001.csv",
        "fixed_point_000.json",
        "fixed_point_001.json",
    ] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tmp_dir("seed-override");
    let cfg = write_config(
        &dir,
        "exp.toml",
        &format!(
            "loss = \"square\"\nlambda = 1.0\nn = 100\nn_test = 500\ntrials = 3\ngh_points = 24\nseed = 9\n{SMALL_MODEL}"
        ),
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let res = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_a.to_str().unwrap()]);
    assert!(res.status.success());
    let res = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--seed",
        "10",
    ]);
    assert!(res.status.success());
    let a = fs::read_to_string(out_a.join("trials.csv")).unwrap();
    let b = fs::read_to_string(out_b.join("trials.csv")).unwrap();
    assert_ne!(a, b);
}
