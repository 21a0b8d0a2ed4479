//! Heterogeneous teams: aerial (UAV) and underwater (UUV) agents in ℝ³, surface (USV)
//! agents in the plane.
//!
//! Topology: each team is fully connected except the USVs, which form a line; UAV `k` and
//! UUV `k` each talk to USV `k mod n_usv`.

use homprog_core::potentials::PotentialBlock;
use homprog_core::solver::AdmmParams;
use homprog_core::EdgePotential;
use nalgebra::DVector;

use crate::error::{ControlError, Result};
use crate::ocp::StageCost;
use crate::scenario::{
    AgentSpec, CoordinationEdge, FormationTarget, InitialState, MpcSettings, Scenario, ScenarioKind, WarmStartMode,
};
use crate::selectors::Selector;

#[derive(Debug, Clone, PartialEq)]
pub struct MultidomainConfig {
    pub uavs: usize,
    pub usvs: usize,
    pub uuvs: usize,
    /// Spacing between consecutive USVs along the x-axis.
    pub usv_spacing: f64,
    /// Distance between neighboring UUVs.
    pub uuv_radius: f64,
    /// Distance between a UAV and its USV.
    pub uav_usv_radius: f64,
    /// Distance between a UUV and its USV.
    pub uuv_usv_radius: f64,
    /// UAV altitude tracked by the UAV stage cost, if any.
    pub uav_altitude: Option<f64>,
    pub control_weight: f64,
    pub control_bound: f64,
    pub dt: f64,
    pub horizon: usize,
    pub steps: usize,
    pub admm: AdmmParams<f64>,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for MultidomainConfig {
    fn default() -> Self {
        Self {
            uavs: 2,
            usvs: 2,
            uuvs: 2,
            usv_spacing: 2.0,
            uuv_radius: 2.0,
            uav_usv_radius: 3.0,
            uuv_usv_radius: 2.0,
            uav_altitude: None,
            control_weight: 2.0,
            control_bound: 2.0,
            dt: 0.1,
            horizon: 10,
            steps: 50,
            admm: AdmmParams { max_iters: 10, ..AdmmParams::default() },
            gamma: 1.0,
            seed: 0,
        }
    }
}

fn agent(name: String, d: usize, cfg: &MultidomainConfig, altitude: Option<f64>) -> AgentSpec {
    let mut cost = StageCost::control_effort(2 * d, d, cfg.control_weight);
    if let Some(h) = altitude {
        cost.q[(d - 1, d - 1)] = 1.0;
        cost.x_ref[d - 1] = h;
    }
    AgentSpec {
        name,
        dim: d,
        dt: cfg.dt,
        initial: InitialState::Uniform { lo: -5.0, hi: 5.0 },
        cost,
        control_lo: DVector::from_element(d, -cfg.control_bound),
        control_hi: DVector::from_element(d, cfg.control_bound),
    }
}

/// Zero on positions and consensus on velocities, or `position_part` on positions.
fn position_velocity(position_part: Option<EdgePotential<f64>>) -> EdgePotential<f64> {
    EdgePotential::blockwise(
        6,
        vec![
            PotentialBlock { offset: 0, potential: position_part.unwrap_or(EdgePotential::zero(3)) },
            PotentialBlock { offset: 3, potential: EdgePotential::quadratic(3) },
        ],
    )
}

pub fn build_multidomain_scenario(cfg: &MultidomainConfig) -> Result<Scenario> {
    if cfg.uavs == 0 || cfg.usvs == 0 || cfg.uuvs == 0 {
        return Err(ControlError::Scenario("every team needs at least one agent".into()));
    }
    let mut agents = Vec::new();
    agents.extend((0..cfg.uavs).map(|k| agent(format!("uav{k}"), 3, cfg, cfg.uav_altitude)));
    agents.extend((0..cfg.usvs).map(|k| agent(format!("usv{k}"), 2, cfg, None)));
    agents.extend((0..cfg.uuvs).map(|k| agent(format!("uuv{k}"), 3, cfg, None)));
    let uav = |k: usize| k;
    let usv = |k: usize| cfg.uavs + k;
    let uuv = |k: usize| cfg.uavs + cfg.usvs + k;

    let mut edges = Vec::new();
    let mut formation = Vec::new();
    for i in 0..cfg.uavs {
        for j in i + 1..cfg.uavs {
            edges.push(CoordinationEdge::from_selectors(
                &agents, uav(i), uav(j), Selector::FullState, Selector::FullState, position_velocity(None),
            )?);
        }
    }
    for k in 0..cfg.usvs.saturating_sub(1) {
        let target = DVector::from_vec(vec![-cfg.usv_spacing, 0.0]);
        edges.push(CoordinationEdge::from_selectors(
            &agents, usv(k), usv(k + 1), Selector::Position, Selector::Position,
            EdgePotential::displacement(target.clone()),
        )?);
        formation.push(FormationTarget { a: usv(k), b: usv(k + 1), displacement: target });
    }
    for i in 0..cfg.uuvs {
        for j in i + 1..cfg.uuvs {
            edges.push(CoordinationEdge::from_selectors(
                &agents, uuv(i), uuv(j), Selector::FullState, Selector::FullState,
                position_velocity(Some(EdgePotential::fixed_distance_sq(3, cfg.uuv_radius))),
            )?);
        }
    }
    for k in 0..cfg.uavs {
        edges.push(CoordinationEdge::from_selectors(
            &agents, uav(k), usv(k % cfg.usvs), Selector::Position, Selector::PlanarLift,
            EdgePotential::fixed_distance_sq(3, cfg.uav_usv_radius),
        )?);
    }
    for k in 0..cfg.uuvs {
        edges.push(CoordinationEdge::from_selectors(
            &agents, uuv(k), usv(k % cfg.usvs), Selector::Position, Selector::PlanarLift,
            EdgePotential::fixed_distance_norm(3, cfg.uuv_usv_radius),
        )?);
    }

    let scenario = Scenario {
        name: "multidomain".into(),
        kind: ScenarioKind::Multidomain,
        agents,
        edges,
        formation,
        mpc: MpcSettings {
            horizon: cfg.horizon,
            steps: cfg.steps,
            admm: cfg.admm,
            gamma: cfg.gamma,
            warm_start: WarmStartMode::Primal,
        },
        seed: cfg.seed,
    };
    scenario.validate()?;
    Ok(scenario)
}
