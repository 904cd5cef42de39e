mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reliopt::data::{save_csv, Dataset, DEFAULT_LABEL_COLUMN};
use reliopt::logistic::ModelFile;
use reliopt::pipeline::PrescriptionReport;

fn reliopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reliopt"))
        .args(args)
        .env_remove("RELIOPT_SEED")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ratio_file(dir: &Path, n: usize) -> PathBuf {
    let (d, _) = common::synthetic_ratio_dataset(21, n, 150);
    let path = dir.join("banks.csv");
    save_csv(&d, &path, DEFAULT_LABEL_COLUMN).unwrap();
    path
}

#[test]
fn gen_writes_header_and_rows_deterministically() {
    let out = reliopt(&["gen", "--features", "9", "--rows", "200", "--seed", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 201);
    assert_eq!(lines[0].rsplit(',').next(), Some("label"));
    assert_eq!(lines[0].split(',').count(), 10);
    assert!(stderr(&out).contains("true beta"));

    let again = reliopt(&["gen", "--features", "9", "--rows", "200", "--seed", "1"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn gen_rejects_bad_dimensions() {
    assert_eq!(
        reliopt(&["gen", "--features", "0", "--rows", "10"]).status.code(),
        Some(2)
    );
    assert_eq!(
        reliopt(&["gen", "--features", "2", "--rows", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        reliopt(&["gen", "--features", "2", "--rows", "10", "--lower", "1", "--upper", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fit_writes_one_coefficient_per_ratio_plus_intercept() {
    let dir = tempfile::tempdir().unwrap();
    let data = ratio_file(dir.path(), 12);
    let model = dir.path().join("model.json");
    let out = reliopt(&["fit", "--data", p(&data), "--out", p(&model)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let file: ModelFile<f64> = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(file.beta.len(), 13);
    assert_eq!(file.feature_names.len(), 12);
    assert!(String::from_utf8_lossy(&out.stdout).contains("converged"));
}

#[test]
fn fit_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out = reliopt(&["fit", "--data", p(&missing), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent.csv"));

    let data = ratio_file(dir.path(), 3);
    let out = reliopt(&["fit", "--data", p(&data), "--label", "nosuch", "--json"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn single_class_data_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = Dataset::new(vec![vec![0.1], vec![0.4], vec![0.9]], vec![1, 1, 1], vec!["r".into()]).unwrap();
    let data = dir.path().join("one.csv");
    save_csv(&d, &data, DEFAULT_LABEL_COLUMN).unwrap();
    let out = reliopt(&["pipeline", "--data", p(&data), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("single-class dataset"), "{}", stderr(&out));
}

#[test]
fn pipeline_report_satisfies_dominance() {
    let dir = tempfile::tempdir().unwrap();
    let data = ratio_file(dir.path(), 9);
    let report_path = dir.path().join("report.json");
    let out = reliopt(&[
        "pipeline",
        "--data",
        p(&data),
        "--out",
        p(&report_path),
        "--pop",
        "20",
        "--iters",
        "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("report.model.json").exists());
    let r: PrescriptionReport<f64> = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let best = r.max_ensemble_reliability().unwrap();
    assert!(r.corner.value >= best);
    assert!(r.prescriptions.iter().all(|x| best >= x.reliability));
    assert_eq!(r.ensemble.len(), 25);
    assert_eq!(r.config.swarm.population_size, 20);
}

#[test]
fn flag_overrides_config_with_a_note() {
    let dir = tempfile::tempdir().unwrap();
    let data = ratio_file(dir.path(), 4);
    let config = dir.path().join("cfg.json");
    std::fs::write(
        &config,
        format!(r#"{{"data": {:?}, "pop": 30, "iters": 4, "runs": 3}}"#, p(&data)),
    )
    .unwrap();
    let out = reliopt(&["pipeline", "--config", p(&config), "--pop", "12", "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("note: --pop"), "{}", stderr(&out));
    let r: PrescriptionReport<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.config.swarm.population_size, 12);
    assert_eq!(r.config.swarm.max_iterations, 4);
    assert_eq!(r.config.n_runs, 3);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"populaton": 30}"#).unwrap();
    let out = reliopt(&["pipeline", "--config", p(&config), "--json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero_everywhere() {
    for cmd in [
        &["--help"][..],
        &["fit", "--help"],
        &["optimize", "--help"],
        &["pipeline", "--help"],
        &["gen", "--help"],
    ] {
        let out = reliopt(cmd);
        assert_eq!(out.status.code(), Some(0), "{cmd:?}");
        assert!(!out.stdout.is_empty());
    }
    assert_eq!(reliopt(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn seed_comes_from_environment_when_not_given() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_reliopt"));
        cmd.args(["gen", "--features", "3", "--rows", "20"])
            .args(extra)
            .env_remove("RELIOPT_SEED");
        if let Some(v) = env {
            cmd.env("RELIOPT_SEED", v);
        }
        cmd.output().unwrap()
    };
    let from_env = run(Some("99"), &[]);
    let from_flag = run(None, &["--seed", "99"]);
    let default = run(None, &[]);
    assert!(from_env.status.success());
    assert_eq!(from_env.stdout, from_flag.stdout);
    assert_ne!(from_env.stdout, default.stdout);
    assert_eq!(run(Some("not-a-number"), &[]).status.code(), Some(2));
}

#[test]
fn optimize_with_explicit_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    std::fs::write(&model, r#"{"feature_names": ["a", "b"], "beta": [0.0, 2.0, -1.0]}"#).unwrap();
    let bounds = dir.path().join("b.json");
    std::fs::write(&bounds, r#"{"lower": [-1.0, 0.0], "upper": [1.0, 3.0]}"#).unwrap();
    let out = reliopt(&[
        "optimize",
        "--model",
        p(&model),
        "--bounds",
        p(&bounds),
        "--json",
        "--runs",
        "4",
        "--iters",
        "50",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r: PrescriptionReport<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.corner.position, vec![1.0, 0.0]);
    assert!((r.corner.value - 0.880_797_077_977_882_3).abs() < 1e-15);
}
