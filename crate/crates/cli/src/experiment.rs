//! Runs a resolved scenario and writes its CSVs and summary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use homprog_control::{Simulator, TrajectoryLog, METRIC_NAMES};
use serde::Serialize;

use crate::config::{DefaultFill, GoalConfig, ResolvedConfig};
use crate::error::{CliError, Result};

/// Overrides the output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "HOMPROG_OUT_DIR";

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SOLVER_FILE: &str = "solver.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalResult {
    pub metric: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    pub value: f64,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub kind: String,
    pub seed: u64,
    pub steps_requested: usize,
    pub steps_executed: usize,
    pub final_metrics: BTreeMap<String, f64>,
    pub goals: Vec<GoalResult>,
    pub admm_iterations_total: usize,
    pub admm_unconverged_steps: usize,
    pub fallback_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
    pub defaults: Vec<DefaultFill>,
}

impl RunSummary {
    pub fn goals_met(&self) -> bool {
        self.goals.iter().all(|g| g.met)
    }

    /// A run succeeds when every step executed and no step fell back to zero control.
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.fallback_steps == 0 && self.steps_executed == self.steps_requested
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub log: TrajectoryLog,
    pub out_dir: PathBuf,
}

/// `--out` first, then the environment variable, then the config, then `out/<name>`.
pub fn resolve_out_dir(flag: Option<&Path>, env: Option<&str>, config: Option<&Path>, name: &str) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| Path::new("out").join(name))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    f(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

fn evaluate_goals(goals: &[GoalConfig], log: &TrajectoryLog) -> Vec<GoalResult> {
    let metrics = log.final_metrics();
    goals
        .iter()
        .map(|g| {
            let value = metrics.get(&g.metric).unwrap_or(f64::NAN);
            GoalResult { metric: g.metric.clone(), min: g.min, max: g.max, value, met: g.met_by(value) }
        })
        .collect()
}

/// Simulates the scenario and writes the trajectory, metrics and solver CSVs and
/// `summary.json` into `out_dir`. Outputs are written even when a step fails.
pub fn run_experiment(resolved: &ResolvedConfig, options: &RunOptions, out_dir: &Path) -> Result<RunOutcome> {
    let mut scenario = resolved.scenario.clone();
    if let Some(seed) = options.seed {
        scenario.seed = seed;
    }
    let steps = options.steps.unwrap_or(scenario.mpc.steps);
    scenario.mpc.steps = steps;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let start = Instant::now();
    let mut sim = Simulator::new(&scenario)?;
    let mut error = None;
    for _ in 0..steps {
        if let Err(e) = sim.step() {
            error = Some(e.to_string());
            break;
        }
    }
    let wall = start.elapsed().as_secs_f64();
    let log = sim.into_log();

    write_file(&out_dir.join(TRAJECTORY_FILE), |w| log.write_trajectory_csv(w))?;
    write_file(&out_dir.join(METRICS_FILE), |w| log.write_metrics_csv(w))?;
    write_file(&out_dir.join(SOLVER_FILE), |w| log.write_solver_csv(w))?;

    let final_metrics = METRIC_NAMES.iter().map(|n| n.to_string()).zip(log.final_metrics().values()).collect();
    let summary = RunSummary {
        scenario: scenario.name.clone(),
        kind: scenario.kind.name().to_string(),
        seed: scenario.seed,
        steps_requested: steps,
        steps_executed: log.steps(),
        final_metrics,
        goals: evaluate_goals(&resolved.goals, &log),
        admm_iterations_total: log.total_admm_iterations(),
        admm_unconverged_steps: log
            .records
            .iter()
            .filter(|r| r.report.as_ref().is_some_and(|rep| !rep.converged()))
            .count(),
        fallback_steps: log.fallback_steps(),
        error,
        wall_clock_seconds: wall,
        defaults: resolved.defaults.clone(),
    };
    write_file(&out_dir.join(SUMMARY_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)
    })?;
    Ok(RunOutcome { summary, log, out_dir: out_dir.to_path_buf() })
}
