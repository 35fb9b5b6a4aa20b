use std::path::Path;
use std::process::Command;

use driftclass::harness::{reaggregate, run_experiment, run_repetition, ExperimentConfig, Method};

const TINY: &str = r#"{
    "model": {"preset": "example2", "thetas": [2.5]},
    "steps": 20,
    "train_sizes": [30, 60],
    "test_size": 60,
    "repetitions": 3,
    "train": {"max_epochs": 3, "patience": 2, "batch_size": 64},
    "direct": {"enabled": true, "search_budget": 1, "max_epochs": 3, "patience": 2},
    "seed": 7
}"#;

fn tiny(out: Option<&Path>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json_str(TINY).unwrap();
    cfg.out_dir = out.map(Path::to_path_buf);
    cfg
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_driftclass"));
    c.env("DRIFTCLASS_THREADS", "1");
    c
}

#[test]
fn single_class_has_zero_errors() {
    let cfg = ExperimentConfig::from_json_str(
        r#"{
            "model": {"preset": "custom", "dim": 1,
                      "drift": {"kind": "mean_reverting", "rates": [1.0]}},
            "steps": 20, "train_sizes": [20], "test_size": 20, "repetitions": 1,
            "train": {"max_epochs": 2, "patience": 1},
            "direct": {"enabled": true, "search_budget": 1, "max_epochs": 2}
        }"#,
    )
    .unwrap();
    let rec = run_repetition(&cfg, 0).unwrap();
    let cell = &rec.results[0];
    assert_eq!(cell.plug_in, 0.0);
    assert_eq!(cell.bayes, 0.0);
    assert_eq!(cell.direct, Some(0.0));
}

#[test]
fn repetitions_are_reproducible() {
    let cfg = tiny(None);
    let a = run_repetition(&cfg, 1).unwrap();
    let b = run_repetition(&cfg, 1).unwrap();
    assert_eq!(a, b);
    let c = run_repetition(&cfg, 2).unwrap();
    assert_ne!(a.seed, c.seed);
}

#[test]
fn experiment_writes_consistent_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let cfg = tiny(Some(&run));
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.n_ok, 3);
    assert_eq!(report.rows.len(), 2 * 3);
    for row in &report.rows {
        assert_eq!(row.point.n_reps, 3);
        assert!(row.risk.ci_lower <= row.risk.mean && row.risk.mean <= row.risk.ci_upper);
        assert!(row.point.ci_lower <= row.point.mean_excess && row.point.mean_excess <= row.point.ci_upper);
    }
    assert!(report.row("theta=2.5", 60, Method::Direct).is_some());

    let lines = std::fs::read_to_string(run.join("records.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);
    let csv = std::fs::read_to_string(run.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.lines().skip(1).all(|l| l.starts_with(&cfg.hash())));

    let again = dir.path().join("again");
    reaggregate(std::slice::from_ref(&run), &again).unwrap();
    for name in ["report.csv", "table.csv", "fits.csv"] {
        assert_eq!(
            std::fs::read(run.join(name)).unwrap(),
            std::fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }

    // a second run with another seed cannot be merged with the first
    let other = dir.path().join("other");
    let mut cfg2 = tiny(Some(&other));
    cfg2.seed = 8;
    cfg2.repetitions = 2;
    run_experiment(&cfg2).unwrap();
    assert!(reaggregate(&[run, other], &dir.path().join("mixed")).is_err());
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    for name in ["a", "b"] {
        let cfg = tiny(Some(&dir.path().join(name)));
        run_experiment(&cfg).unwrap();
        out.push(std::fs::read(dir.path().join(name).join("report.csv")).unwrap());
        let records = std::fs::read(dir.path().join(name).join("records.jsonl")).unwrap();
        out.push(records);
    }
    assert_eq!(out[0], out[2]);
    assert_eq!(out[1], out[3]);
}

#[test]
fn cli_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.json");
    std::fs::write(&config, TINY).unwrap();
    let train = dir.path().join("train");
    let test = dir.path().join("test");
    let models = dir.path().join("models");
    let eval = dir.path().join("eval");

    let ok = |args: &[&str]| {
        let out = bin().args(args).output().unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    };
    let cfg = config.to_str().unwrap();
    ok(&["simulate", "--config", cfg, "--out", train.to_str().unwrap()]);
    assert!(train.join("dataset.csv").exists() && train.join("dataset.json").exists());
    ok(&[
        "simulate",
        "--config",
        cfg,
        "--split",
        "test",
        "--out",
        test.to_str().unwrap(),
    ]);
    let data = train.join("dataset");
    ok(&[
        "train-drift",
        "--config",
        cfg,
        "--data",
        data.to_str().unwrap(),
        "--out",
        models.to_str().unwrap(),
    ]);
    ok(&[
        "train-direct",
        "--config",
        cfg,
        "--data",
        data.to_str().unwrap(),
        "--out",
        models.to_str().unwrap(),
    ]);
    let printed = ok(&[
        "evaluate",
        "--config",
        cfg,
        "--data",
        test.join("dataset").to_str().unwrap(),
        "--models",
        models.to_str().unwrap(),
        "--out",
        eval.to_str().unwrap(),
    ]);
    for method in ["bayes", "plug_in", "direct"] {
        let line = printed.lines().find(|l| l.starts_with(method)).unwrap();
        let v: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(eval.join("predictions.csv").exists());
    assert!(eval.join("confusion_plug_in.csv").exists());
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(
        &config,
        r#"{"model": {"preset": "example2", "thetas": [1.5]}, "train_sizes": [0]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["experiment", "--config", config.to_str().unwrap(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train_sizes[0]"));

    std::fs::write(&config, r#"{"model": {"preset": "example2"}, "tset_size": 5}"#).unwrap();
    let out = bin()
        .args(["bayes-risk", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_bayes_risk_near_chance_for_weak_signal() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("weak.json");
    std::fs::write(&config, r#"{"model": {"preset": "example2", "thetas": [0.5]}}"#).unwrap();
    let out = bin()
        .args(["bayes-risk", "--config", config.to_str().unwrap(), "--paths", "10000"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let risk: f64 = text.trim().split('\t').nth(1).unwrap().parse().unwrap();
    assert!((0.46..=0.52).contains(&risk), "{risk}");
}
