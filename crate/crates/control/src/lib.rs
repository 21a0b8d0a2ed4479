//! Optimal control of linear agents as homological programs, and a multi-agent MPC
//! simulator built on the ADMM solver.
//!
//! A single agent's finite-horizon problem lives on the dynamics sheaf of
//! [`build_dynamics_sheaf`]: its admissible trajectories are exactly the zeros of the sheaf
//! Laplacian. [`AgentObjective`] packages the stage costs and control box as a node
//! objective, and [`build_coordination_program`] couples agents through a coordination sheaf
//! on their terminal states.

pub mod dynamics_sheaf;
pub mod error;
pub mod log;
pub mod lti;
pub mod metrics;
pub mod mpc;
pub mod multidomain;
pub mod ocp;
pub mod scenario;
pub mod selectors;

pub use dynamics_sheaf::{
    admissibility_residual, build_dynamics_sheaf, is_admissible, DynamicsSheafSpec, RolloutMap, TrajectoryLayout,
};
pub use error::{ControlError, Result};
pub use log::{StepRecord, TrajectoryLog};
pub use lti::LtiSystem;
pub use metrics::{Metrics, METRIC_NAMES};
pub use mpc::{build_coordination_program, initial_states, mpc_step, propagate, run_mpc, run_mpc_steps, Simulator, StepOutcome, WarmStart};
pub use multidomain::{build_multidomain_scenario, MultidomainConfig};
pub use ocp::{AgentObjective, AgentOcp, StageCost};
pub use scenario::{
    AgentSpec, CoordinationEdge, FormationTarget, InitialState, MpcSettings, Scenario, ScenarioKind, WarmStartMode,
};
pub use selectors::Selector;
