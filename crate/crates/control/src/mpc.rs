//! Receding-horizon control: one coordination program per step, solved by ADMM, first
//! control applied.

use homprog_core::solver::{admm_solve, AdmmReport, HomologicalProgram, NodeObjective};
use homprog_core::{CellularSheaf, Cochain0};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics_sheaf::TrajectoryLayout;
use crate::error::{shape, Result};
use crate::log::{StepRecord, TrajectoryLog};
use crate::metrics;
use crate::ocp::AgentObjective;
use crate::scenario::{AgentSpec, InitialState, Scenario, WarmStartMode};

/// Draws initial states; uniform components come from a ChaCha8 stream seeded with `seed`,
/// agent by agent.
pub fn initial_states(scenario: &Scenario, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scenario
        .agents
        .iter()
        .map(|a| match &a.initial {
            InitialState::Fixed(x) => x.clone(),
            InitialState::Uniform { lo, hi } => {
                DVector::from_fn(a.state_dim(), |_, _| if lo < hi { rng.random_range(*lo..*hi) } else { *lo })
            }
        })
        .collect()
}

fn layouts(scenario: &Scenario) -> Vec<TrajectoryLayout> {
    scenario
        .agents
        .iter()
        .map(|a| TrajectoryLayout::new(a.state_dim(), a.dim, scenario.mpc.horizon))
        .collect()
}

/// Restriction acting on the whole trajectory through its terminal state.
fn lift_terminal(f: &DMatrix<f64>, layout: &TrajectoryLayout) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(f.nrows(), layout.dim());
    m.view_mut((0, layout.terminal_offset()), (f.nrows(), f.ncols())).copy_from(f);
    m
}

/// Node variables are agent trajectories with the agents' optimal-control objectives; the
/// coordination sheaf acts on terminal states.
pub fn build_coordination_program(scenario: &Scenario, states: &[DVector<f64>]) -> Result<HomologicalProgram<f64>> {
    if states.len() != scenario.agents.len() {
        return Err(shape("agent states", scenario.agents.len(), states.len()));
    }
    let (state_sheaf, potentials) = scenario.coordination_sheaf()?;
    let layouts = layouts(scenario);
    let graph = state_sheaf.graph().clone();
    let restrictions = (0..graph.edge_count())
        .map(|e| {
            let (i, j) = graph.edge(e);
            let (fi, fj) = state_sheaf.restrictions(e);
            (lift_terminal(fi, &layouts[i]), lift_terminal(fj, &layouts[j]))
        })
        .collect();
    let node_dims = layouts.iter().map(TrajectoryLayout::dim).collect();
    let sheaf = CellularSheaf::new(graph, node_dims, restrictions)?;
    let objectives = scenario
        .agents
        .iter()
        .zip(states)
        .map(|(a, x)| agent_objective(a, scenario.mpc.horizon, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(HomologicalProgram::new(sheaf, potentials, objectives)?)
}

fn agent_objective(agent: &AgentSpec, horizon: usize, x: &DVector<f64>) -> Result<Box<dyn NodeObjective<f64>>> {
    if x.len() != agent.state_dim() {
        return Err(shape(format!("state of agent {}", agent.name), agent.state_dim(), x.len()));
    }
    Ok(Box::new(AgentObjective::new(agent.ocp(horizon, x.clone())?)))
}

/// Primal and dual iterates carried between MPC steps.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub z: Cochain0<f64>,
    pub y: Cochain0<f64>,
}

impl WarmStart {
    /// Advances every trajectory by one step: drops `(x(1), u(1))`, repeats the last control
    /// and extends `z` by one step of the dynamics. With [`WarmStartMode::Primal`] the dual
    /// restarts from zero.
    ///
    /// Otherwise only the dual's terminal block is kept. At a fixed point the scaled dual lies in the
    /// image of `δᵀ`, which the coordination sheaf confines to terminal states.
    pub fn shifted(&self, scenario: &Scenario) -> Result<Self> {
        let keep_dual = scenario.mpc.warm_start == WarmStartMode::PrimalDual;
        let layouts = layouts(scenario);
        let mut z = Vec::with_capacity(layouts.len());
        let mut y = Vec::with_capacity(layouts.len());
        for (i, (layout, agent)) in layouts.iter().zip(&scenario.agents).enumerate() {
            let sys = agent.system()?;
            let t = layout.horizon;
            let (wz, wy) = (self.z.block(i), self.y.block(i));
            let x_next = sys.step(&layout.state(wz, t), &layout.control(wz, t - 1));
            z.push(shift(layout, wz, &x_next));
            let mut dual = DVector::zeros(layout.dim());
            if keep_dual {
                dual.rows_mut(layout.terminal_offset(), layout.n).copy_from(&layout.state(wy, t));
            }
            y.push(dual);
        }
        Ok(Self { z: Cochain0::from_blocks(z), y: Cochain0::from_blocks(y) })
    }
}

fn shift(layout: &TrajectoryLayout, w: &DVector<f64>, terminal: &DVector<f64>) -> DVector<f64> {
    let stride = layout.n + layout.m;
    let mut out = DVector::zeros(layout.dim());
    let kept = layout.dim() - stride;
    out.rows_mut(0, kept).copy_from(&w.rows(stride, kept));
    let t = layout.horizon;
    out.rows_mut(layout.control_offset(t - 1), layout.m).copy_from(&layout.control(w, t - 1));
    out.rows_mut(layout.terminal_offset(), layout.n).copy_from(terminal);
    out
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// `u_i(1)` per agent, clamped to the control box.
    pub controls: Vec<DVector<f64>>,
    /// Empty when the solver failed.
    pub report: Option<AdmmReport<f64>>,
    /// Set when the solver failed and zero controls were applied.
    pub fallback: Option<String>,
    pub warm: Option<WarmStart>,
}

fn zero_controls(scenario: &Scenario) -> Vec<DVector<f64>> {
    scenario
        .agents
        .iter()
        .map(|a| DVector::<f64>::zeros(a.dim).zip_zip_map(&a.control_lo, &a.control_hi, |u, lo, hi| u.clamp(lo, hi)))
        .collect()
}

/// Every agent coasting on clamped zero controls, with a zero dual. Starting from `z = 0`
/// instead would pull the first prox towards the origin.
fn coasting_start(scenario: &Scenario, states: &[DVector<f64>]) -> Result<WarmStart> {
    let controls = zero_controls(scenario);
    let mut z = Vec::with_capacity(states.len());
    for ((a, x), u) in scenario.agents.iter().zip(states).zip(&controls) {
        let sys = a.system()?;
        let layout = TrajectoryLayout::new(a.state_dim(), a.dim, scenario.mpc.horizon);
        let path = sys.rollout(x, &vec![u.clone(); layout.horizon - 1]);
        z.push(layout.pack(&path, &vec![u.clone(); layout.horizon - 1])?);
    }
    let y = z.iter().map(|w| DVector::zeros(w.len())).collect();
    Ok(WarmStart { z: Cochain0::from_blocks(z), y: Cochain0::from_blocks(y) })
}

/// Solves one coordination program from `states` and returns the first controls.
///
/// Without a usable warm start the solve begins from the coasting trajectories. Solver failures do
/// not abort: the step falls back to zero controls and reports why.
pub fn mpc_step(scenario: &Scenario, states: &[DVector<f64>], warm: Option<&WarmStart>) -> Result<StepOutcome> {
    let program = build_coordination_program(scenario, states)?;
    let cold;
    let start = match warm {
        Some(w) if w.z.dims() == program.sheaf().node_dims() => w,
        _ => {
            cold = coasting_start(scenario, states)?;
            &cold
        }
    };
    let outcome = match admm_solve(&program, &scenario.mpc.admm, Some(&start.z), Some(&start.y)) {
        Ok(o) => o,
        Err(e) => {
            return Ok(StepOutcome {
                controls: zero_controls(scenario),
                report: None,
                fallback: Some(e.to_string()),
                warm: None,
            })
        }
    };
    let graph = program.sheaf().graph();
    let controls = layouts(scenario)
        .iter()
        .zip(&scenario.agents)
        .enumerate()
        .map(|(i, (layout, a))| {
            let plan = if graph.degree(i) == 0 {
                isolated_plan(a, scenario.mpc.horizon, &states[i]).unwrap_or_else(|| outcome.x.block(i).clone())
            } else {
                outcome.x.block(i).clone()
            };
            layout
                .control(&plan, 1)
                .zip_zip_map(&a.control_lo, &a.control_hi, |u, lo, hi| u.clamp(lo, hi))
        })
        .collect();
    Ok(StepOutcome {
        controls,
        report: Some(outcome.report),
        fallback: None,
        warm: Some(WarmStart { z: outcome.z, y: outcome.y }),
    })
}

/// An agent without coordination edges decouples from the program, and its exact optimum
/// is its own control problem's. ADMM would stop after one prox there since `x = z` holds
/// trivially.
fn isolated_plan(agent: &AgentSpec, horizon: usize, x: &DVector<f64>) -> Option<DVector<f64>> {
    AgentObjective::new(agent.ocp(horizon, x.clone()).ok()?).solve().ok()
}

/// Applies each agent's dynamics.
pub fn propagate(scenario: &Scenario, states: &[DVector<f64>], controls: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    scenario
        .agents
        .iter()
        .zip(states.iter().zip(controls))
        .map(|(a, (x, u))| Ok(a.system()?.step(x, u)))
        .collect()
}

/// Steps a scenario forward one MPC step at a time, logging as it goes.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    scenario: &'a Scenario,
    states: Vec<DVector<f64>>,
    warm: Option<WarmStart>,
    log: TrajectoryLog,
}

impl<'a> Simulator<'a> {
    /// Validates the scenario and draws initial states with its seed.
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let states = initial_states(scenario, scenario.seed);
        let log = TrajectoryLog::new(states.clone(), metrics::compute(scenario, &states)?);
        Ok(Self { scenario, states, warm: None, log })
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn into_log(self) -> TrajectoryLog {
        self.log
    }

    pub fn step(&mut self) -> Result<&StepRecord> {
        let scenario = self.scenario;
        let shifted = match (&self.warm, scenario.mpc.warm_start) {
            (Some(w), WarmStartMode::Primal | WarmStartMode::PrimalDual) => Some(w.shifted(scenario)?),
            _ => None,
        };
        let outcome = mpc_step(scenario, &self.states, shifted.as_ref())?;
        let states = propagate(scenario, &self.states, &outcome.controls)?;
        let record = StepRecord {
            step: self.log.steps() + 1,
            metrics: metrics::compute(scenario, &states)?,
            states: states.clone(),
            controls: outcome.controls,
            report: outcome.report,
            fallback: outcome.fallback,
        };
        self.states = states;
        self.warm = outcome.warm;
        self.log.push(record);
        Ok(self.log.records.last().expect("record was just pushed"))
    }
}

/// Runs the scenario's `steps` MPC steps from initial states drawn with its seed.
pub fn run_mpc(scenario: &Scenario) -> Result<TrajectoryLog> {
    run_mpc_steps(scenario, scenario.mpc.steps)
}

pub fn run_mpc_steps(scenario: &Scenario, steps: usize) -> Result<TrajectoryLog> {
    let mut sim = Simulator::new(scenario)?;
    for _ in 0..steps {
        sim.step()?;
    }
    Ok(sim.into_log())
}
