//! Multi-agent scenarios: agents with double-integrator dynamics, a coordination sheaf over
//! their communication graph, and the MPC settings.

use homprog_core::solver::AdmmParams;
use homprog_core::{CellularSheaf, EdgePotential, Graph, PotentialAssignment};
use nalgebra::{DMatrix, DVector};

use crate::dynamics_sheaf::DynamicsSheafSpec;
use crate::error::{shape, ControlError, Result};
use crate::lti::LtiSystem;
use crate::ocp::{AgentOcp, StageCost};
use crate::selectors::Selector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Consensus,
    StationaryFormation,
    Flocking,
    MovingFormation,
    Multidomain,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Consensus,
        ScenarioKind::StationaryFormation,
        ScenarioKind::Flocking,
        ScenarioKind::MovingFormation,
        ScenarioKind::Multidomain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Consensus => "consensus",
            ScenarioKind::StationaryFormation => "stationary_formation",
            ScenarioKind::Flocking => "flocking",
            ScenarioKind::MovingFormation => "moving_formation",
            ScenarioKind::Multidomain => "multidomain",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fixed(DVector<f64>),
    /// Every position and velocity component drawn uniformly from `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub name: String,
    /// Spatial dimension `d`; the state is `(p, v) ∈ ℝ²ᵈ` and the control `u ∈ ℝᵈ`.
    pub dim: usize,
    pub dt: f64,
    pub initial: InitialState,
    pub cost: StageCost,
    pub control_lo: DVector<f64>,
    pub control_hi: DVector<f64>,
}

impl AgentSpec {
    pub fn state_dim(&self) -> usize {
        2 * self.dim
    }

    pub fn system(&self) -> Result<LtiSystem> {
        LtiSystem::double_integrator(self.dim, self.dt)
    }

    pub fn ocp(&self, horizon: usize, initial_state: DVector<f64>) -> Result<AgentOcp> {
        let spec = DynamicsSheafSpec::new(self.system()?, horizon, initial_state)?;
        AgentOcp::uniform(spec, self.cost.clone(), self.control_lo.clone(), self.control_hi.clone())
    }
}

/// A coordination edge: `y = F_a x_a(T) − F_b x_b(T)` scored by `potential`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationEdge {
    pub a: usize,
    pub b: usize,
    pub restriction_a: DMatrix<f64>,
    pub restriction_b: DMatrix<f64>,
    pub potential: EdgePotential<f64>,
}

impl CoordinationEdge {
    pub fn from_selectors(
        agents: &[AgentSpec],
        a: usize,
        b: usize,
        sel_a: Selector,
        sel_b: Selector,
        potential: EdgePotential<f64>,
    ) -> Result<Self> {
        let dim = |i: usize| {
            agents
                .get(i)
                .map(|s| s.dim)
                .ok_or_else(|| ControlError::Scenario(format!("edge references unknown agent {i}")))
        };
        Ok(Self {
            a,
            b,
            restriction_a: sel_a.matrix(dim(a)?)?,
            restriction_b: sel_b.matrix(dim(b)?)?,
            potential,
        })
    }

    /// The same edge stored with `a < b`; swapping endpoints negates `y`, so the potential
    /// is reflected.
    pub fn canonical(&self) -> Self {
        if self.a < self.b {
            self.clone()
        } else {
            Self {
                a: self.b,
                b: self.a,
                restriction_a: self.restriction_b.clone(),
                restriction_b: self.restriction_a.clone(),
                potential: self.potential.reflected(),
            }
        }
    }
}

/// Desired `p_a − p_b`, used by the formation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationTarget {
    pub a: usize,
    pub b: usize,
    pub displacement: DVector<f64>,
}

/// What each MPC solve inherits from the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStartMode {
    /// Cold start from zero.
    Off,
    /// Previous `z` shifted by one step; the dual restarts from zero.
    Primal,
    /// Shifted `z` and the previous dual's terminal block.
    #[default]
    PrimalDual,
}

impl WarmStartMode {
    pub fn name(self) -> &'static str {
        match self {
            WarmStartMode::Off => "off",
            WarmStartMode::Primal => "primal",
            WarmStartMode::PrimalDual => "primal_dual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSettings {
    pub horizon: usize,
    pub steps: usize,
    pub admm: AdmmParams<f64>,
    /// Weight on the coordination potentials.
    pub gamma: f64,
    pub warm_start: WarmStartMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub agents: Vec<AgentSpec>,
    pub edges: Vec<CoordinationEdge>,
    pub formation: Vec<FormationTarget>,
    pub mpc: MpcSettings,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(ControlError::Scenario("scenario has no agents".into()));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.dim == 0 {
                return Err(ControlError::Scenario(format!("agent {i} has zero spatial dimension")));
            }
            if !(a.dt > 0.0 && a.dt.is_finite()) {
                return Err(ControlError::Scenario(format!("agent {i}: dt must be positive, got {}", a.dt)));
            }
            if a.cost.q.nrows() != a.state_dim() || a.cost.r.nrows() != a.dim {
                return Err(shape(
                    format!("agent {i} stage cost"),
                    format!("Q {0}x{0}, R {1}x{1}", a.state_dim(), a.dim),
                    format!("Q {0}x{0}, R {1}x{1}", a.cost.q.nrows(), a.cost.r.nrows()),
                ));
            }
            if a.control_lo.len() != a.dim || a.control_hi.len() != a.dim {
                return Err(shape(format!("agent {i} control bounds"), a.dim, a.control_lo.len()));
            }
            if let Some(k) = (0..a.dim).find(|&k| !(a.control_lo[k] <= a.control_hi[k])) {
                return Err(ControlError::Bounds { index: k, lo: a.control_lo[k], hi: a.control_hi[k] });
            }
            match &a.initial {
                InitialState::Fixed(x) if x.len() != a.state_dim() => {
                    return Err(shape(format!("agent {i} initial state"), a.state_dim(), x.len()));
                }
                InitialState::Uniform { lo, hi } if !(lo <= hi) => {
                    return Err(ControlError::Scenario(format!("agent {i}: empty initial range [{lo}, {hi}]")));
                }
                _ => {}
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            let n = self.agents.len();
            if e.a >= n || e.b >= n {
                return Err(ControlError::Scenario(format!("edge {k} references an agent outside 0..{n}")));
            }
            let rows = e.restriction_a.nrows();
            if e.restriction_b.nrows() != rows || e.potential.dim() != rows {
                return Err(shape(
                    format!("edge {k} stalk"),
                    rows,
                    format!("{} (restriction b), {} (potential)", e.restriction_b.nrows(), e.potential.dim()),
                ));
            }
            if e.restriction_a.ncols() != self.agents[e.a].state_dim() {
                return Err(shape(format!("edge {k} restriction a"), self.agents[e.a].state_dim(), e.restriction_a.ncols()));
            }
            if e.restriction_b.ncols() != self.agents[e.b].state_dim() {
                return Err(shape(format!("edge {k} restriction b"), self.agents[e.b].state_dim(), e.restriction_b.ncols()));
            }
        }
        for f in &self.formation {
            let n = self.agents.len();
            if f.a >= n || f.b >= n {
                return Err(ControlError::Scenario("formation target references an unknown agent".into()));
            }
            if f.displacement.len() != self.agents[f.a].dim || self.agents[f.a].dim != self.agents[f.b].dim {
                return Err(shape("formation displacement", self.agents[f.a].dim, f.displacement.len()));
            }
        }
        if self.mpc.horizon < 2 {
            return Err(ControlError::Horizon(self.mpc.horizon));
        }
        if !(self.mpc.gamma > 0.0 && self.mpc.gamma.is_finite()) {
            return Err(ControlError::Scenario(format!("gamma must be positive, got {}", self.mpc.gamma)));
        }
        self.mpc.admm.validate()?;
        self.coordination_sheaf()?;
        Ok(())
    }

    /// Whether every agent lives in the same spatial dimension.
    pub fn homogeneous_dim(&self) -> Option<usize> {
        let d = self.agents.first()?.dim;
        self.agents.iter().all(|a| a.dim == d).then_some(d)
    }

    pub fn graph(&self) -> Result<Graph> {
        Ok(Graph::new(self.agents.len(), self.edges.iter().map(|e| (e.a, e.b)))?)
    }

    /// Sheaf over the communication graph acting on agent states, and the `γ`-weighted
    /// potentials, with every edge in canonical orientation.
    pub fn coordination_sheaf(&self) -> Result<(CellularSheaf<f64>, PotentialAssignment<f64>)> {
        let edges: Vec<CoordinationEdge> = self.edges.iter().map(CoordinationEdge::canonical).collect();
        let graph = Graph::new(self.agents.len(), edges.iter().map(|e| (e.a, e.b)))?;
        let node_dims = self.agents.iter().map(AgentSpec::state_dim).collect();
        let restrictions = edges.iter().map(|e| (e.restriction_a.clone(), e.restriction_b.clone())).collect();
        let sheaf = CellularSheaf::new(graph, node_dims, restrictions)?;
        let potentials = edges
            .iter()
            .map(|e| {
                if self.mpc.gamma == 1.0 {
                    e.potential.clone()
                } else {
                    EdgePotential::scaled(self.mpc.gamma, e.potential.clone())
                }
            })
            .collect();
        let potentials = PotentialAssignment::new(&sheaf, potentials)?;
        Ok((sheaf, potentials))
    }
}
