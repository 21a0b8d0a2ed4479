//! Per-step records of an MPC run and their CSV forms.
//!
//! Row `step = k` of the trajectory CSV holds each agent's state after `k` steps and the
//! control that produced it; `step = 0` is the initial state with zero control. Metrics at
//! step `k` are functions of the states in the same rows.

use std::io::{self, Write};

use homprog_core::solver::AdmmReport;
use nalgebra::DVector;

use crate::metrics::{Metrics, METRIC_NAMES};

#[derive(Debug, Clone)]
pub struct StepRecord {
    /// 1-based MPC step.
    pub step: usize,
    /// States after applying `controls`.
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub metrics: Metrics,
    pub report: Option<AdmmReport<f64>>,
    pub fallback: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub initial_states: Vec<DVector<f64>>,
    pub initial_metrics: Metrics,
    pub records: Vec<StepRecord>,
}

fn axis_names(dim: usize) -> Vec<String> {
    if dim <= 3 {
        ["x", "y", "z"][..dim].iter().map(|s| s.to_string()).collect()
    } else {
        (0..dim).map(|k| k.to_string()).collect()
    }
}

fn push_components(row: &mut Vec<String>, v: &[f64], width: usize) {
    for k in 0..width {
        row.push(v.get(k).map(|x| format!("{x:.16e}")).unwrap_or_default());
    }
}

impl TrajectoryLog {
    pub fn new(initial_states: Vec<DVector<f64>>, initial_metrics: Metrics) -> Self {
        Self { initial_states, initial_metrics, records: Vec::new() }
    }

    pub fn push(&mut self, record: StepRecord) {
        self.records.push(record);
    }

    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn final_states(&self) -> &[DVector<f64>] {
        self.records.last().map_or(&self.initial_states, |r| &r.states)
    }

    pub fn final_metrics(&self) -> Metrics {
        self.records.last().map_or(self.initial_metrics, |r| r.metrics)
    }

    pub fn fallback_steps(&self) -> usize {
        self.records.iter().filter(|r| r.fallback.is_some()).count()
    }

    pub fn total_admm_iterations(&self) -> usize {
        self.records.iter().filter_map(|r| r.report.as_ref()).map(|r| r.iterations.len()).sum()
    }

    /// Header `step,agent,p_*,v_*,u_*`; components are padded to the largest agent dimension
    /// with empty fields.
    pub fn write_trajectory_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.initial_states.iter().map(|x| x.len() / 2).max().unwrap_or(0);
        let axes = axis_names(dim);
        let mut header = vec!["step".to_string(), "agent".to_string()];
        for prefix in ["p", "v", "u"] {
            header.extend(axes.iter().map(|a| format!("{prefix}_{a}")));
        }
        writeln!(w, "{}", header.join(","))?;
        let mut write_rows = |step: usize, states: &[DVector<f64>], controls: Option<&[DVector<f64>]>| {
            for (i, x) in states.iter().enumerate() {
                let d = x.len() / 2;
                let mut row = vec![step.to_string(), i.to_string()];
                push_components(&mut row, &x.as_slice()[..d], dim);
                push_components(&mut row, &x.as_slice()[d..], dim);
                match controls {
                    Some(u) => push_components(&mut row, u[i].as_slice(), dim),
                    None => push_components(&mut row, &vec![0.0; d], dim),
                }
                writeln!(w, "{}", row.join(","))?;
            }
            Ok::<_, io::Error>(())
        };
        write_rows(0, &self.initial_states, None)?;
        for r in &self.records {
            write_rows(r.step, &r.states, Some(&r.controls))?;
        }
        Ok(())
    }

    /// Long format `step,metric_name,value`.
    pub fn write_metrics_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,metric_name,value")?;
        let rows = std::iter::once((0, &self.initial_metrics)).chain(self.records.iter().map(|r| (r.step, &r.metrics)));
        for (step, m) in rows {
            for (name, v) in METRIC_NAMES.iter().zip(m.values()) {
                writeln!(w, "{step},{name},{v:.16e}")?;
            }
        }
        Ok(())
    }

    /// `step,iter,primal_res,dual_res,objective` for every ADMM iteration of every step.
    pub fn write_solver_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,iter,primal_res,dual_res,objective")?;
        for r in &self.records {
            for it in r.report.iter().flat_map(|rep| &rep.iterations) {
                writeln!(
                    w,
                    "{},{},{:.16e},{:.16e},{:.16e}",
                    r.step, it.iter, it.primal_residual, it.dual_residual, it.objective
                )?;
            }
        }
        Ok(())
    }
}
