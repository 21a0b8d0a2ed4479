//! Coordination metrics computed from agent states alone, so they can be recomputed from a
//! logged trajectory.

use nalgebra::DVector;

use crate::error::Result;
use crate::scenario::Scenario;

/// Metric names in the order they are logged.
pub const METRIC_NAMES: [&str; 8] = [
    "x_spread",
    "position_spread",
    "velocity_spread",
    "min_pairwise_distance",
    "max_pairwise_distance",
    "formation_error",
    "formation_rel_error",
    "coordination_potential",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    /// `max_i p_{i,x} − min_i p_{i,x}`.
    pub x_spread: f64,
    /// Largest per-component spread of positions.
    pub position_spread: f64,
    /// Largest per-component spread of velocities.
    pub velocity_spread: f64,
    pub min_pairwise_distance: f64,
    pub max_pairwise_distance: f64,
    /// `max_e ‖p_a − p_b − b_e‖` over formation targets; zero without targets.
    pub formation_error: f64,
    /// `max_e ‖p_a − p_b − b_e‖ / ‖b_e‖`.
    pub formation_rel_error: f64,
    /// `Σ_e U_e((δX)_e)` on the state-level coordination sheaf.
    pub coordination_potential: f64,
}

impl Metrics {
    pub fn values(&self) -> [f64; 8] {
        [
            self.x_spread,
            self.position_spread,
            self.velocity_spread,
            self.min_pairwise_distance,
            self.max_pairwise_distance,
            self.formation_error,
            self.formation_rel_error,
            self.coordination_potential,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_NAMES.iter().position(|&n| n == name).map(|k| self.values()[k])
    }
}

fn position(x: &DVector<f64>) -> DVector<f64> {
    x.rows(0, x.len() / 2).into_owned()
}

fn velocity(x: &DVector<f64>) -> DVector<f64> {
    let d = x.len() / 2;
    x.rows(d, d).into_owned()
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.fold(f64::INFINITY, f64::min);
    if hi.is_finite() { hi - lo } else { 0.0 }
}

/// Largest per-component spread over agents; components are compared up to the smallest
/// agent dimension.
fn component_spread(vs: &[DVector<f64>]) -> f64 {
    let d = vs.iter().map(|v| v.len()).min().unwrap_or(0);
    (0..d).map(|k| spread(vs.iter().map(move |v| v[k]))).fold(0.0, f64::max)
}

/// Pairwise position distances; positions of different dimension are zero-padded.
fn pairwise_distances(ps: &[DVector<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            let d = ps[i].len().max(ps[j].len());
            let s: f64 = (0..d)
                .map(|k| ps[i].get(k).copied().unwrap_or(0.0) - ps[j].get(k).copied().unwrap_or(0.0))
                .map(|v| v * v)
                .sum();
            out.push(s.sqrt());
        }
    }
    out
}

pub fn compute(scenario: &Scenario, states: &[DVector<f64>]) -> Result<Metrics> {
    let ps: Vec<_> = states.iter().map(position).collect();
    let vs: Vec<_> = states.iter().map(velocity).collect();
    let dists = pairwise_distances(&ps);
    let (min_d, max_d) = if dists.is_empty() {
        (0.0, 0.0)
    } else {
        (dists.iter().copied().fold(f64::INFINITY, f64::min), dists.iter().copied().fold(0.0, f64::max))
    };
    let mut formation_error: f64 = 0.0;
    let mut formation_rel_error: f64 = 0.0;
    for f in &scenario.formation {
        let err = (&ps[f.a] - &ps[f.b] - &f.displacement).norm();
        formation_error = formation_error.max(err);
        let scale = f.displacement.norm();
        formation_rel_error = formation_rel_error.max(if scale > 0.0 { err / scale } else { err });
    }
    let (sheaf, potentials) = scenario.coordination_sheaf()?;
    let x = homprog_core::Cochain0::from_blocks(states.to_vec());
    let coordination_potential = potentials.total_value(&sheaf.coboundary(&x)?)?;
    Ok(Metrics {
        x_spread: spread(ps.iter().map(|p| p[0])),
        position_spread: component_spread(&ps),
        velocity_spread: component_spread(&vs),
        min_pairwise_distance: min_d,
        max_pairwise_distance: max_d,
        formation_error,
        formation_rel_error,
        coordination_potential,
    })
}
