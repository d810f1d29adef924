//! End-to-end command behavior: output shapes, exit codes, reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pilot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pilot"))
}

fn run(args: &[&str]) -> Output {
    pilot().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn write_conjugate_config(dir: &Path, replicates: u64, seed: u64) -> PathBuf {
    let path = dir.join("conjugate.json");
    let config = serde_json::json!({
        "scenario": {
            "model": "conjugate",
            "n_per_arm": 30,
            "followup_threshold": 0.8,
            "adherence_threshold": 0.7,
            "design_prior_f": {"kind": "beta", "alpha": 40.0, "beta": 10.0},
            "design_prior_a": {"kind": "beta", "alpha": 11.2, "beta": 4.8},
            "analysis_prior_f": {"kind": "beta", "alpha": 1.0, "beta": 1.0},
            "analysis_prior_a": {"kind": "beta", "alpha": 1.0, "beta": 1.0}
        },
        "replicates": replicates,
        "seed": seed
    });
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn write_hier_config(dir: &Path, replicates: u64, iterations: u64, rhat: f64) -> PathBuf {
    let path = dir.join("hier.json");
    let config = serde_json::json!({
        "scenario": {
            "model": "hierarchical",
            "clusters_per_arm": 6,
            "design_prior": {},
            "partition": {},
            "analysis_prior": {
                "mu_c": {"kind": "normal", "mean": 0.0, "sd": 10.0},
                "sigma2_c": {"kind": "inverse_gamma", "shape": 2.0, "rate": 2.0},
                "p_f": {"kind": "beta", "alpha": 1.0, "beta": 1.0},
                "p_a": {"kind": "beta", "alpha": 1.0, "beta": 1.0},
                "mu": {"kind": "normal", "mean": 0.0, "sd": 10.0},
                "sigma2_w": {"kind": "inverse_gamma", "shape": 2.0, "rate": 2.0},
                "rho": {"kind": "beta", "alpha": 1.0, "beta": 1.0}
            },
            "mcmc": {
                "chains": 2,
                "iterations": iterations,
                "burnin": iterations / 2,
                "step_sigma_w": 0.4,
                "step_rho": 0.4,
                "rhat_threshold": rhat
            }
        },
        "replicates": replicates,
        "seed": 9
    });
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn elicit_prints_closed_form() {
    let out = run(&["elicit", "--p1", "0.5", "--p2", "0.25"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "c1,c2,c3\n0.2,0.6,0.2\n");

    let out = run(&["elicit", "--p1", "0.5", "--p2", "0.5"]);
    let line = stdout(&out);
    let row: Vec<f64> =
        line.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    for v in row {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn elicit_rejects_degenerate_probability() {
    let out = run(&["elicit", "--p1", "0", "--p2", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn matrix_requires_out_and_valid_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_conjugate_config(dir.path(), 100, 1);
    let out = run(&["matrix", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let zero = write_conjugate_config(dir.path(), 0, 1);
    let out_path = dir.path().join("m.csv");
    let out =
        run(&["matrix", "--config", zero.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["matrix", "--config", "/nonexistent.json", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn matrix_is_reproducible_and_carries_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_conjugate_config(dir.path(), 2000, 17);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let out = run(&["matrix", "--config", config.to_str().unwrap(), "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 17);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn ocs_always_red_policy_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_conjugate_config(dir.path(), 2000, 3);
    let matrix = dir.path().join("m.csv");
    assert!(run(&["matrix", "--config", config.to_str().unwrap(), "--out", matrix.to_str().unwrap()])
        .status
        .success());

    let out = run(&["ocs", "--matrix", matrix.to_str().unwrap(), "--c", "1,0,0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "oc1,oc2,oc3,se1,se2,se3,expected_loss,n_replicates,n_nonconverged"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0"); // oc1
    assert_eq!(row[2], "0"); // oc3
}

#[test]
fn ocs_requires_some_loss_vector() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_conjugate_config(dir.path(), 500, 3);
    let matrix = dir.path().join("m.csv");
    assert!(run(&["matrix", "--config", config.to_str().unwrap(), "--out", matrix.to_str().unwrap()])
        .status
        .success());
    let out = run(&["ocs", "--matrix", matrix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pareto_is_deterministic_under_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_conjugate_config(dir.path(), 2000, 5);
    let matrix = dir.path().join("m.csv");
    assert!(run(&["matrix", "--config", config.to_str().unwrap(), "--out", matrix.to_str().unwrap()])
        .status
        .success());
    let a = run(&["pareto", "--matrix", matrix.to_str().unwrap(), "--candidates", "40", "--seed", "2"]);
    let b = run(&["pareto", "--matrix", matrix.to_str().unwrap(), "--candidates", "40", "--seed", "2"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).lines().count() > 1);
}

#[test]
fn sweep_rejects_empty_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_conjugate_config(dir.path(), 500, 3);
    let out = run(&["sweep", "--config", config.to_str().unwrap(), "--sizes", "", "--c1", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_hierarchical_sweep_hits_capacity_limit() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_hier_config(dir.path(), 200_000, 1000, 1.05);
    let out = run(&["sweep", "--config", config.to_str().unwrap(), "--sizes", "6,12", "--c1", "0.2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn strict_convergence_limit_fails_with_dedicated_code() {
    let dir = tempfile::tempdir().unwrap();
    // Deliberately short chains and a near-impossible diagnostic threshold.
    let config = write_hier_config(dir.path(), 10, 400, 1.0005);
    let out_path = dir.path().join("m.csv");
    let out = run(&[
        "matrix",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--max-nonconverged",
        "0.0",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut config: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(write_conjugate_config(dir.path(), 100, 1)).unwrap(),
    )
    .unwrap();
    config["extra"] = serde_json::json!(true);
    std::fs::write(&path, config.to_string()).unwrap();
    let out_path = dir.path().join("m.csv");
    let out = run(&["matrix", "--config", path.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
