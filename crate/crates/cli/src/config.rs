//! TOML scenario configuration.
//!
//! Every table rejects unknown keys. Optional keys fall back to built-in defaults, and each
//! fallback is recorded as a [`DefaultFill`] so runs can echo it.

use std::path::PathBuf;

use homprog_control::multidomain::{build_multidomain_scenario, MultidomainConfig};
use homprog_control::{
    AgentSpec, CoordinationEdge, FormationTarget, InitialState, MpcSettings, Scenario, ScenarioKind, Selector,
    StageCost, WarmStartMode, METRIC_NAMES,
};
use homprog_core::potentials::PotentialBlock;
use homprog_core::solver::{AdmmParams, ZUpdateMode};
use homprog_core::{EdgePotential, Graph};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_DIM: usize = 2;
pub const DEFAULT_CONTROL_WEIGHT: f64 = 0.1;
pub const DEFAULT_CONTROL_BOUND: f64 = 2.0;
pub const DEFAULT_INITIAL_RANGE: (f64, f64) = (-5.0, 5.0);
pub const DEFAULT_HORIZON: usize = 10;
pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_ADMM_ITERS: usize = 10;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub kind: KindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpc: Option<MpcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admm: Option<AdmmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_defaults: Option<AgentConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordination: Option<CoordinationConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub formation: Vec<FormationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multidomain: Option<MultidomainTable>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub goals: Vec<GoalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindConfig {
    Consensus,
    StationaryFormation,
    Flocking,
    MovingFormation,
    Multidomain,
}

impl From<KindConfig> for ScenarioKind {
    fn from(k: KindConfig) -> Self {
        match k {
            KindConfig::Consensus => ScenarioKind::Consensus,
            KindConfig::StationaryFormation => ScenarioKind::StationaryFormation,
            KindConfig::Flocking => ScenarioKind::Flocking,
            KindConfig::MovingFormation => ScenarioKind::MovingFormation,
            KindConfig::Multidomain => ScenarioKind::Multidomain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Weight on the coordination potentials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<WarmStartConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStartConfig {
    Off,
    Primal,
    PrimalDual,
}

impl From<WarmStartConfig> for WarmStartMode {
    fn from(w: WarmStartConfig) -> Self {
        match w {
            WarmStartConfig::Off => WarmStartMode::Off,
            WarmStartConfig::Primal => WarmStartMode::Primal,
            WarmStartConfig::PrimalDual => WarmStartMode::PrimalDual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    /// Outer iterations per MPC step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion_max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_mode: Option<ZModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_tol_start: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZModeConfig {
    Auto,
    Projection,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Spatial dimension; the state is position and velocity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    /// Diagonal of the state weight `Q`, length `2·dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_diag: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_ref: Option<Vec<f64>>,
    /// `R = control_weight · I`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_weight: Option<f64>,
    /// Symmetric box `[−b, b]` on every control component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_hi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Fixed { state: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Complete,
    Path,
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorConfig {
    FullState,
    Position,
    Velocity,
    XPosition,
    PlanarLift,
}

impl From<SelectorConfig> for Selector {
    fn from(s: SelectorConfig) -> Self {
        match s {
            SelectorConfig::FullState => Selector::FullState,
            SelectorConfig::Position => Selector::Position,
            SelectorConfig::Velocity => Selector::Velocity,
            SelectorConfig::XPosition => Selector::XPosition,
            SelectorConfig::PlanarLift => Selector::PlanarLift,
        }
    }
}

/// Edges of `topology` use the shared selector and potential; entries of `edges` add edges
/// or replace the topology's edge on the same pair.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<SelectorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub agents: [usize; 2],
    /// Same selector at both ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<SelectorConfig>,
    /// One selector per end, in the order of `agents`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selectors: Option<[SelectorConfig; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
}

/// Edge potential; its dimension is the edge stalk's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero {},
    Quadratic {},
    Dissensus {},
    MatrixWeighted {
        a: Vec<Vec<f64>>,
    },
    Displacement {
        target: Vec<f64>,
    },
    /// `(‖y‖² − r²)²`; give either `radius` or `r_squared`.
    FixedDistanceSq {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_squared: Option<f64>,
    },
    FixedDistanceNorm {
        radius: f64,
    },
    Blockwise {
        blocks: Vec<BlockConfig>,
    },
    Scaled {
        weight: f64,
        inner: Box<PotentialConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub offset: usize,
    pub dim: usize,
    pub potential: PotentialConfig,
}

/// Desired `p_a − p_b`, scored by the formation metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationConfig {
    pub agents: [usize; 2],
    pub displacement: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultidomainTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uavs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usvs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uuvs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usv_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uuv_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav_usv_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uuv_usv_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav_altitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

/// Pass/fail threshold on a final metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalConfig {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl GoalConfig {
    pub fn met_by(&self, value: f64) -> bool {
        self.min.is_none_or(|lo| value >= lo) && self.max.is_none_or(|hi| value <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// A built-in default used because the config left a key out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefaultFill {
    pub path: String,
    pub value: serde_json::Value,
}

/// A config turned into a runnable scenario.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub goals: Vec<GoalConfig>,
    pub defaults: Vec<DefaultFill>,
    pub output_dir: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(invalid(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
        ));
    }
    Ok(cfg)
}

pub fn to_toml_string(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| CliError::Serialize(e.to_string()))
}

pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

struct Fills(Vec<DefaultFill>);

impl Fills {
    fn take<T: Clone + Serialize>(&mut self, path: impl Into<String>, v: Option<T>, default: T) -> T {
        v.unwrap_or_else(|| {
            self.0.push(DefaultFill {
                path: path.into(),
                value: serde_json::to_value(&default).unwrap_or(serde_json::Value::Null),
            });
            default
        })
    }
}

fn finite(path: &str, v: f64) -> Result<f64> {
    if v.is_finite() { Ok(v) } else { Err(invalid(path, format!("must be finite, got {v}"))) }
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() { Ok(v) } else { Err(invalid(path, format!("must be positive, got {v}"))) }
}

fn vector(path: &str, v: &[f64], len: usize) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(invalid(path, format!("expected {len} entries, found {}", v.len())));
    }
    for (k, &x) in v.iter().enumerate() {
        finite(&format!("{path}[{k}]"), x)?;
    }
    Ok(DVector::from_column_slice(v))
}

impl ScenarioConfig {
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut fills = Fills(Vec::new());
        let seed = fills.take("seed", self.seed, DEFAULT_SEED);
        let mpc_cfg = self.mpc.clone().unwrap_or_default();
        let mpc = MpcSettings {
            horizon: fills.take("mpc.horizon", mpc_cfg.horizon, DEFAULT_HORIZON),
            steps: fills.take("mpc.steps", mpc_cfg.steps, DEFAULT_STEPS),
            admm: self.resolve_admm(&mut fills)?,
            gamma: positive("mpc.gamma", fills.take("mpc.gamma", mpc_cfg.gamma, 1.0))?,
            warm_start: fills.take("mpc.warm_start", mpc_cfg.warm_start, WarmStartConfig::PrimalDual).into(),
        };
        if mpc.horizon < 2 {
            return Err(invalid("mpc.horizon", format!("must be at least 2, got {}", mpc.horizon)));
        }
        for (k, g) in self.goals.iter().enumerate() {
            if !METRIC_NAMES.contains(&g.metric.as_str()) {
                return Err(invalid(
                    format!("goals[{k}].metric"),
                    format!("unknown metric `{}` (expected one of {})", g.metric, METRIC_NAMES.join(", ")),
                ));
            }
            if g.min.is_none() && g.max.is_none() {
                return Err(invalid(format!("goals[{k}]"), "needs `min` or `max`"));
            }
        }

        let scenario = if self.kind == KindConfig::Multidomain {
            self.resolve_multidomain(&mut fills, mpc, seed)?
        } else {
            if self.multidomain.is_some() {
                return Err(invalid("multidomain", "only allowed when kind = \"multidomain\""));
            }
            let agents = self.resolve_agents(&mut fills)?;
            let edges = self.resolve_edges(&agents)?;
            let formation = self.resolve_formation(&agents)?;
            Scenario { name: self.name.clone(), kind: self.kind.into(), agents, edges, formation, mpc, seed }
        };
        scenario.validate().map_err(|e| invalid("scenario", e.to_string()))?;
        Ok(ResolvedConfig {
            scenario,
            goals: self.goals.clone(),
            defaults: fills.0,
            output_dir: self.output.as_ref().and_then(|o| o.dir.clone()),
        })
    }

    fn resolve_admm(&self, fills: &mut Fills) -> Result<AdmmParams<f64>> {
        let c = self.admm.clone().unwrap_or_default();
        let d = AdmmParams::<f64>::default();
        let z_mode = match fills.take("admm.z_mode", c.z_mode, ZModeConfig::Auto) {
            ZModeConfig::Auto => ZUpdateMode::Auto,
            ZModeConfig::Projection => ZUpdateMode::Projection,
            ZModeConfig::Relaxed => ZUpdateMode::Relaxed,
        };
        let params = AdmmParams {
            rho: positive("admm.rho", fills.take("admm.rho", c.rho, d.rho))?,
            alpha: positive("admm.alpha", fills.take("admm.alpha", c.alpha, d.alpha))?,
            eps1: positive("admm.eps1", fills.take("admm.eps1", c.eps1, d.eps1))?,
            eps2: positive("admm.eps2", fills.take("admm.eps2", c.eps2, d.eps2))?,
            max_iters: fills.take("admm.max_iters", c.max_iters, DEFAULT_ADMM_ITERS),
            diffusion_max_iters: fills.take("admm.diffusion_max_iters", c.diffusion_max_iters, d.diffusion_max_iters),
            z_mode,
            inner_tol_start: c.inner_tol_start.map(|v| positive("admm.inner_tol_start", v)).transpose()?,
        };
        params.validate().map_err(|e| invalid("admm", e.to_string()))?;
        Ok(params)
    }

    fn resolve_agents(&self, fills: &mut Fills) -> Result<Vec<AgentSpec>> {
        if self.agents.is_empty() {
            return Err(invalid("agents", "at least one agent is required"));
        }
        let defaults = self.agent_defaults.clone().unwrap_or_default();
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| resolve_agent(i, a, &defaults, fills))
            .collect()
    }

    fn resolve_edges(&self, agents: &[AgentSpec]) -> Result<Vec<CoordinationEdge>> {
        let coord = self.coordination.clone().unwrap_or_default();
        let n = agents.len();
        let mut pairs: Vec<(usize, usize, Option<&EdgeConfig>, String)> = Vec::new();
        if let Some(top) = coord.topology {
            let graph = match top {
                Topology::Complete => Graph::complete(n),
                Topology::Path => Graph::path(n),
                Topology::Cycle => Graph::cycle(n),
            }
            .map_err(|e| invalid("coordination.topology", e.to_string()))?;
            pairs.extend(graph.edges().iter().map(|&(a, b)| (a, b, None, "coordination".to_string())));
        }
        for (k, e) in coord.edges.iter().enumerate() {
            let path = format!("coordination.edges[{k}]");
            let [a, b] = e.agents;
            if a >= n || b >= n || a == b {
                return Err(invalid(format!("{path}.agents"), format!("invalid pair ({a}, {b}) for {n} agents")));
            }
            match pairs.iter_mut().find(|p| (p.0.min(p.1), p.0.max(p.1)) == (a.min(b), a.max(b))) {
                Some(p) if p.2.is_none() => *p = (a, b, Some(e), path),
                Some(_) => return Err(invalid(path, format!("duplicate edge ({a}, {b})"))),
                None => pairs.push((a, b, Some(e), path)),
            }
        }
        pairs
            .into_iter()
            .map(|(a, b, e, path)| {
                let selectors = match e {
                    Some(EdgeConfig { selector: Some(_), selectors: Some(_), .. }) => {
                        return Err(invalid(&path, "give `selector` or `selectors`, not both"));
                    }
                    Some(EdgeConfig { selectors: Some([sa, sb]), .. }) => Some((*sa, *sb)),
                    Some(EdgeConfig { selector: Some(s), .. }) => Some((*s, *s)),
                    _ => coord.selector.map(|s| (s, s)),
                };
                let (sa, sb) = selectors.ok_or_else(|| invalid(format!("{path}.selector"), "missing selector"))?;
                let (sa, sb): (Selector, Selector) = (sa.into(), sb.into());
                let stalk = sa.output_dim(agents[a].dim);
                if sb.output_dim(agents[b].dim) != stalk {
                    return Err(invalid(
                        format!("{path}.selectors"),
                        format!("{sa} and {sb} give stalks of different dimension"),
                    ));
                }
                let (pot_path, pot) = match e.and_then(|e| e.potential.as_ref()) {
                    Some(p) => (format!("{path}.potential"), p),
                    None => (
                        "coordination.potential".to_string(),
                        coord
                            .potential
                            .as_ref()
                            .ok_or_else(|| invalid(format!("{path}.potential"), "missing potential"))?,
                    ),
                };
                let potential = pot.build(&pot_path, stalk)?;
                CoordinationEdge::from_selectors(agents, a, b, sa, sb, potential).map_err(|e| invalid(&path, e.to_string()))
            })
            .collect()
    }

    fn resolve_formation(&self, agents: &[AgentSpec]) -> Result<Vec<FormationTarget>> {
        self.formation
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let path = format!("formation[{k}]");
                let [a, b] = f.agents;
                if a >= agents.len() || b >= agents.len() {
                    return Err(invalid(format!("{path}.agents"), "references an unknown agent"));
                }
                if agents[a].dim != agents[b].dim {
                    return Err(invalid(format!("{path}.agents"), "agents differ in dimension"));
                }
                let displacement = vector(&format!("{path}.displacement"), &f.displacement, agents[a].dim)?;
                Ok(FormationTarget { a, b, displacement })
            })
            .collect()
    }

    fn resolve_multidomain(&self, fills: &mut Fills, mpc: MpcSettings, seed: u64) -> Result<Scenario> {
        if !self.agents.is_empty() || self.agent_defaults.is_some() || self.coordination.is_some() {
            return Err(invalid(
                "kind",
                "multidomain scenarios generate their agents and edges; remove `agents`, `agent_defaults` and `coordination`",
            ));
        }
        let t = self.multidomain.clone().unwrap_or_default();
        let d = MultidomainConfig::default();
        let cfg = MultidomainConfig {
            uavs: fills.take("multidomain.uavs", t.uavs, d.uavs),
            usvs: fills.take("multidomain.usvs", t.usvs, d.usvs),
            uuvs: fills.take("multidomain.uuvs", t.uuvs, d.uuvs),
            usv_spacing: fills.take("multidomain.usv_spacing", t.usv_spacing, d.usv_spacing),
            uuv_radius: positive("multidomain.uuv_radius", fills.take("multidomain.uuv_radius", t.uuv_radius, d.uuv_radius))?,
            uav_usv_radius: positive(
                "multidomain.uav_usv_radius",
                fills.take("multidomain.uav_usv_radius", t.uav_usv_radius, d.uav_usv_radius),
            )?,
            uuv_usv_radius: positive(
                "multidomain.uuv_usv_radius",
                fills.take("multidomain.uuv_usv_radius", t.uuv_usv_radius, d.uuv_usv_radius),
            )?,
            uav_altitude: t.uav_altitude,
            control_weight: positive(
                "multidomain.control_weight",
                fills.take("multidomain.control_weight", t.control_weight, d.control_weight),
            )?,
            control_bound: positive(
                "multidomain.control_bound",
                fills.take("multidomain.control_bound", t.control_bound, d.control_bound),
            )?,
            dt: positive("multidomain.dt", fills.take("multidomain.dt", t.dt, DEFAULT_DT))?,
            horizon: mpc.horizon,
            steps: mpc.steps,
            admm: mpc.admm,
            gamma: mpc.gamma,
            seed,
        };
        let mut scenario = build_multidomain_scenario(&cfg).map_err(|e| invalid("multidomain", e.to_string()))?;
        scenario.name = self.name.clone();
        scenario.mpc.warm_start = mpc.warm_start;
        Ok(scenario)
    }
}

fn resolve_agent(i: usize, a: &AgentConfig, defaults: &AgentConfig, fills: &mut Fills) -> Result<AgentSpec> {
    let p = |field: &str| format!("agents[{i}].{field}");
    let name = a.name.clone().unwrap_or_else(|| format!("agent{i}"));
    let dim = fills.take(p("dim"), a.dim.or(defaults.dim), DEFAULT_DIM);
    if dim == 0 {
        return Err(invalid(p("dim"), "must be positive"));
    }
    let n = 2 * dim;
    let dt = positive(&p("dt"), fills.take(p("dt"), a.dt.or(defaults.dt), DEFAULT_DT))?;
    let (lo, hi) = DEFAULT_INITIAL_RANGE;
    let initial = match fills.take(
        p("initial"),
        a.initial.clone().or_else(|| defaults.initial.clone()),
        InitialConfig::Uniform { lo, hi },
    ) {
        InitialConfig::Fixed { state } => InitialState::Fixed(vector(&p("initial.state"), &state, n)?),
        InitialConfig::Uniform { lo, hi } => {
            if !(finite(&p("initial.lo"), lo)? <= finite(&p("initial.hi"), hi)?) {
                return Err(invalid(p("initial"), format!("empty range [{lo}, {hi}]")));
            }
            InitialState::Uniform { lo, hi }
        }
    };
    let q_diag = fills.take(p("q_diag"), a.q_diag.clone().or_else(|| defaults.q_diag.clone()), vec![0.0; n]);
    let q_diag = vector(&p("q_diag"), &q_diag, n)?;
    if q_diag.iter().any(|&v| v < 0.0) {
        return Err(invalid(p("q_diag"), "weights must be nonnegative"));
    }
    let x_ref = fills.take(p("x_ref"), a.x_ref.clone().or_else(|| defaults.x_ref.clone()), vec![0.0; n]);
    let x_ref = vector(&p("x_ref"), &x_ref, n)?;
    let weight = positive(
        &p("control_weight"),
        fills.take(p("control_weight"), a.control_weight.or(defaults.control_weight), DEFAULT_CONTROL_WEIGHT),
    )?;
    let cost = StageCost::new(DMatrix::from_diagonal(&q_diag), DMatrix::identity(dim, dim) * weight, x_ref)
        .map_err(|e| invalid(p("q_diag"), e.to_string()))?;

    let explicit_lo = a.control_lo.clone().or_else(|| defaults.control_lo.clone());
    let explicit_hi = a.control_hi.clone().or_else(|| defaults.control_hi.clone());
    let (control_lo, control_hi) = match (explicit_lo, explicit_hi) {
        (Some(lo), Some(hi)) => (vector(&p("control_lo"), &lo, dim)?, vector(&p("control_hi"), &hi, dim)?),
        (None, None) => {
            let b = positive(
                &p("control_bound"),
                fills.take(p("control_bound"), a.control_bound.or(defaults.control_bound), DEFAULT_CONTROL_BOUND),
            )?;
            (DVector::from_element(dim, -b), DVector::from_element(dim, b))
        }
        _ => return Err(invalid(p("control_lo"), "`control_lo` and `control_hi` must be given together")),
    };
    if let Some(k) = (0..dim).find(|&k| !(control_lo[k] <= control_hi[k])) {
        return Err(invalid(p("control_lo"), format!("component {k}: {} > {}", control_lo[k], control_hi[k])));
    }
    Ok(AgentSpec { name, dim, dt, initial, cost, control_lo, control_hi })
}

impl PotentialConfig {
    pub fn build(&self, path: &str, dim: usize) -> Result<EdgePotential<f64>> {
        let pot = match self {
            PotentialConfig::Zero {} => EdgePotential::zero(dim),
            PotentialConfig::Quadratic {} => EdgePotential::quadratic(dim),
            PotentialConfig::Dissensus {} => EdgePotential::dissensus(dim),
            PotentialConfig::MatrixWeighted { a } => {
                if a.len() != dim || a.iter().any(|row| row.len() != dim) {
                    return Err(invalid(format!("{path}.a"), format!("expected a {dim}x{dim} matrix")));
                }
                EdgePotential::matrix_weighted(DMatrix::from_fn(dim, dim, |i, j| a[i][j]))
            }
            PotentialConfig::Displacement { target } => {
                EdgePotential::displacement(vector(&format!("{path}.target"), target, dim)?)
            }
            PotentialConfig::FixedDistanceSq { radius, r_squared } => {
                let r = match (radius, r_squared) {
                    (Some(r), None) => positive(&format!("{path}.radius"), *r)?,
                    (None, Some(r2)) => positive(&format!("{path}.r_squared"), *r2)?.sqrt(),
                    _ => return Err(invalid(path, "give exactly one of `radius` and `r_squared`")),
                };
                EdgePotential::fixed_distance_sq(dim, r)
            }
            PotentialConfig::FixedDistanceNorm { radius } => {
                EdgePotential::fixed_distance_norm(dim, positive(&format!("{path}.radius"), *radius)?)
            }
            PotentialConfig::Blockwise { blocks } => {
                let blocks = blocks
                    .iter()
                    .enumerate()
                    .map(|(k, b)| {
                        let bp = format!("{path}.blocks[{k}]");
                        if b.dim == 0 || b.offset + b.dim > dim {
                            return Err(invalid(&bp, format!("block {}..{} outside the stalk ℝ^{dim}", b.offset, b.offset + b.dim)));
                        }
                        Ok(PotentialBlock { offset: b.offset, potential: b.potential.build(&format!("{bp}.potential"), b.dim)? })
                    })
                    .collect::<Result<Vec<_>>>()?;
                EdgePotential::blockwise(dim, blocks)
            }
            PotentialConfig::Scaled { weight, inner } => {
                EdgePotential::scaled(positive(&format!("{path}.weight"), *weight)?, inner.build(&format!("{path}.inner"), dim)?)
            }
        };
        pot.validate().map_err(|e| invalid(path, e.to_string()))?;
        Ok(pot)
    }
}
