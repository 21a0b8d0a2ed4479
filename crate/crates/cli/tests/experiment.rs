use std::path::{Path, PathBuf};
use std::process::Command;

use homprog_cli::plot::read_paths;
use homprog_cli::{emit_plot, load_config, parse_config, resolve_out_dir, run_experiment, RunOptions, OUT_DIR_ENV};

const SMALL: &str = r#"
schema_version = 1
name = "small"
kind = "consensus"
seed = 3

[mpc]
steps = 100

[[agents]]
[[agents]]
[[agents]]

[coordination]
topology = "complete"
selector = "x_position"
potential = { kind = "quadratic" }
"#;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn run_writes_all_outputs_and_repeats_exactly() {
    let resolved = parse_config(SMALL).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = run_experiment(&resolved, &RunOptions::default(), &a).unwrap();
    assert_eq!(out.log.steps(), 100);
    assert!(out.summary.succeeded());
    assert_eq!(out.summary.steps_executed, 100);

    let metrics = read(&a.join("metrics.csv"));
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("step,metric_name,value"));
    // steps 0..=100, eight metrics each
    assert_eq!(lines.count(), 101 * 8);
    let solver = read(&a.join("solver.csv"));
    assert!(solver.starts_with("step,iter,primal_res,dual_res,objective\n"));
    let trajectory = read(&a.join("trajectory.csv"));
    assert!(trajectory.starts_with("step,agent,p_x,p_y,v_x,v_y,u_x,u_y\n"));
    assert_eq!(trajectory.lines().count(), 1 + 101 * 3);
    let row: Vec<&str> = trajectory.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    assert!(row[2].contains('e'), "floats use scientific notation: {}", row[2]);
    let summary: serde_json::Value = serde_json::from_str(&read(&a.join("summary.json"))).unwrap();
    assert_eq!(summary["steps_executed"], 100);
    assert_eq!(summary["seed"], 3);
    assert!(summary["defaults"].as_array().unwrap().iter().any(|d| d["path"] == "agents[0].dt"));

    run_experiment(&resolved, &RunOptions::default(), &b).unwrap();
    assert_eq!(std::fs::read(a.join("metrics.csv")).unwrap(), std::fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("trajectory.csv")).unwrap(), std::fs::read(b.join("trajectory.csv")).unwrap());

    let other = run_experiment(&resolved, &RunOptions { seed: Some(4), steps: Some(2) }, &dir.path().join("c")).unwrap();
    assert_eq!(other.summary.seed, 4);
    assert_eq!(other.log.steps(), 2);
}

#[test]
fn consensus_spread_settles_monotonically() {
    let resolved = load_config(&config("consensus.toml")).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&resolved, &RunOptions::default(), dir.path()).unwrap();
    let spreads: Vec<f64> = out.log.records.iter().map(|r| r.metrics.x_spread).collect();
    let tail = &spreads[spreads.len() - spreads.len() / 5..];
    for w in tail.windows(2) {
        assert!(w[1] <= w[0] + 1e-3, "{} then {}", w[0], w[1]);
    }
}

#[test]
fn flocking_summary_reports_pairwise_distances() {
    let resolved = load_config(&config("flocking.toml")).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&resolved, &RunOptions { seed: Some(1), steps: Some(5) }, dir.path()).unwrap();
    let m = &out.summary.final_metrics;
    let states = out.log.final_states();
    let dist = |i: usize, j: usize| (states[i].rows(0, 2) - states[j].rows(0, 2)).norm();
    let d = [dist(0, 1), dist(0, 2), dist(1, 2)];
    let (lo, hi) = (d.iter().cloned().fold(f64::INFINITY, f64::min), d.iter().cloned().fold(0.0, f64::max));
    assert!((m["min_pairwise_distance"] - lo).abs() < 1e-12);
    assert!((m["max_pairwise_distance"] - hi).abs() < 1e-12);
    assert_eq!(out.summary.goals.len(), 2);
}

#[test]
fn plot_draws_one_path_per_agent() {
    let resolved = parse_config(SMALL).unwrap().resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&resolved, &RunOptions { seed: None, steps: Some(4) }, dir.path()).unwrap();
    let csv = dir.path().join("trajectory.csv");
    let paths = read_paths(&read(&csv)).unwrap();
    assert_eq!(paths.len(), 3);
    assert!(paths.values().all(|p| p.len() == 5));

    let svg = dir.path().join("plot.svg");
    emit_plot(&csv, &svg).unwrap();
    let text = read(&svg);
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<path").count(), 3);
    // one dashed distance line per pair
    assert_eq!(text.matches("stroke-dasharray").count(), 3);
}

#[test]
fn plot_rejects_an_empty_log_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "step,agent,p_x,p_y,v_x,v_y,u_x,u_y\n").unwrap();
    let svg = dir.path().join("plot.svg");
    assert!(emit_plot(&csv, &svg).is_err());
    assert!(!svg.exists());
    std::fs::write(&csv, "").unwrap();
    assert!(emit_plot(&csv, &svg).is_err());
    assert!(!svg.exists());
}

#[test]
fn out_dir_precedence() {
    let flag = Path::new("from-flag");
    let cfg = Path::new("from-config");
    assert_eq!(resolve_out_dir(Some(flag), Some("from-env"), Some(cfg), "x"), PathBuf::from("from-flag"));
    assert_eq!(resolve_out_dir(None, Some("from-env"), Some(cfg), "x"), PathBuf::from("from-env"));
    assert_eq!(resolve_out_dir(None, Some(""), Some(cfg), "x"), PathBuf::from("from-config"));
    assert_eq!(resolve_out_dir(None, None, None, "x"), Path::new("out").join("x"));
}

fn homprog() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homprog"))
}

#[test]
fn binary_honors_the_environment_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let env_dir = dir.path().join("env-out");
    let out = homprog()
        .args(["run", "--config", cfg.to_str().unwrap(), "--steps", "2", "--seed", "1"])
        .env(OUT_DIR_ENV, &env_dir)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_dir.join("metrics.csv").exists());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["steps_executed"], 2);

    let flag_dir = dir.path().join("flag-out");
    let out = homprog()
        .args(["run", "--config", cfg.to_str().unwrap(), "--steps", "1", "--out", flag_dir.to_str().unwrap()])
        .env(OUT_DIR_ENV, &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag_dir.join("summary.json").exists());
}

#[test]
fn binary_validate_and_errors() {
    let out = homprog().args(["validate", "--config", config("flocking.toml").to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("3 agents"), "{text}");
    assert!(text.contains("default"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL.replace("seed = 3", "seed = 3\ncolour = 1")).unwrap();
    let out = homprog().args(["validate", "--config", bad.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}
