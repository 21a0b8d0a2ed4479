//! Per-agent finite-horizon optimal control problems and their node objectives.

use std::fmt;

use homprog_core::solver::{solve_box_qp, BoxQpOptions, NodeObjective};
use nalgebra::{DMatrix, DVector};

use crate::dynamics_sheaf::{DynamicsSheafSpec, RolloutMap, TrajectoryLayout};
use crate::error::{shape, ControlError, Result};

/// `f(x, u) = ½(x − x_ref)ᵀQ(x − x_ref) + ½uᵀRu`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x_ref: DVector<f64>,
}

impl StageCost {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, x_ref: DVector<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != x_ref.len() {
            return Err(shape("stage cost Q", format!("{0}x{0}", x_ref.len()), format!("{}x{}", q.nrows(), q.ncols())));
        }
        if !r.is_square() {
            return Err(shape("stage cost R", "square", format!("{}x{}", r.nrows(), r.ncols())));
        }
        Ok(Self { q, r, x_ref })
    }

    /// Control effort only: `Q = 0`, `R = weight·I`.
    pub fn control_effort(n: usize, m: usize, weight: f64) -> Self {
        Self {
            q: DMatrix::zeros(n, n),
            r: DMatrix::identity(m, m) * weight,
            x_ref: DVector::zeros(n),
        }
    }

    pub fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let e = x - &self.x_ref;
        0.5 * e.dot(&(&self.q * &e)) + 0.5 * u.dot(&(&self.r * u))
    }

    fn is_convex(&self) -> bool {
        psd(&self.q) && psd(&self.r)
    }
}

fn psd(m: &DMatrix<f64>) -> bool {
    if m.is_empty() {
        return true;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.min() >= -1e-10
}

/// `minimize Σ_t f^t(x(t), u(t))` over admissible trajectories with `lo ≤ u(t) ≤ hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentOcp {
    pub spec: DynamicsSheafSpec,
    /// One cost per stage `t = 1, …, T−1`.
    pub stage_costs: Vec<StageCost>,
    pub control_lo: DVector<f64>,
    pub control_hi: DVector<f64>,
}

impl AgentOcp {
    pub fn new(
        spec: DynamicsSheafSpec,
        stage_costs: Vec<StageCost>,
        control_lo: DVector<f64>,
        control_hi: DVector<f64>,
    ) -> Result<Self> {
        let (n, m) = (spec.system.state_dim(), spec.system.control_dim());
        if stage_costs.len() + 1 != spec.horizon {
            return Err(shape("stage costs", spec.horizon - 1, stage_costs.len()));
        }
        for c in &stage_costs {
            if c.q.nrows() != n {
                return Err(shape("stage cost Q", n, c.q.nrows()));
            }
            if c.r.nrows() != m {
                return Err(shape("stage cost R", m, c.r.nrows()));
            }
        }
        if control_lo.len() != m || control_hi.len() != m {
            return Err(shape("control bounds", m, control_lo.len().max(control_hi.len())));
        }
        if let Some(k) = (0..m).find(|&k| !(control_lo[k] <= control_hi[k])) {
            return Err(ControlError::Bounds { index: k, lo: control_lo[k], hi: control_hi[k] });
        }
        Ok(Self { spec, stage_costs, control_lo, control_hi })
    }

    /// The same stage cost at every step.
    pub fn uniform(spec: DynamicsSheafSpec, cost: StageCost, lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        let stages = vec![cost; spec.horizon.saturating_sub(1)];
        Self::new(spec, stages, lo, hi)
    }

    pub fn layout(&self) -> TrajectoryLayout {
        self.spec.layout()
    }

    pub fn objective(&self) -> AgentObjective {
        AgentObjective::new(self.clone())
    }
}

/// `J(w) = Σ_t f^t(x(t), u(t)) + χ(w admissible, u in the box)` over the stacked trajectory.
///
/// The prox eliminates the states through `w = M u + w0` and solves a box-constrained QP
/// in the controls with Hessian `Mᵀ(S + ρI)M`.
#[derive(Clone)]
pub struct AgentObjective {
    ocp: AgentOcp,
    rollout: RolloutMap,
    s: DMatrix<f64>,
    s_lin: DVector<f64>,
    constant: f64,
    lo: DVector<f64>,
    hi: DVector<f64>,
    feasibility_tol: f64,
    qp: BoxQpOptions<f64>,
    convex: bool,
}

impl fmt::Debug for AgentObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentObjective")
            .field("layout", &self.ocp.layout())
            .field("feasibility_tol", &self.feasibility_tol)
            .finish_non_exhaustive()
    }
}

impl AgentObjective {
    pub fn new(ocp: AgentOcp) -> Self {
        let layout = ocp.layout();
        let dim = layout.dim();
        let mut s = DMatrix::zeros(dim, dim);
        let mut s_lin = DVector::zeros(dim);
        let mut constant = 0.0;
        for (k, cost) in ocp.stage_costs.iter().enumerate() {
            let t = k + 1;
            let xo = layout.state_offset(t);
            let uo = layout.control_offset(t);
            let q = (&cost.q + cost.q.transpose()) * 0.5;
            let r = (&cost.r + cost.r.transpose()) * 0.5;
            s.view_mut((xo, xo), (layout.n, layout.n)).copy_from(&q);
            s.view_mut((uo, uo), (layout.m, layout.m)).copy_from(&r);
            s_lin.rows_mut(xo, layout.n).copy_from(&(-(&q * &cost.x_ref)));
            constant += 0.5 * cost.x_ref.dot(&(&q * &cost.x_ref));
        }
        let steps = layout.horizon - 1;
        let lo = DVector::from_fn(layout.m * steps, |k, _| ocp.control_lo[k % layout.m]);
        let hi = DVector::from_fn(layout.m * steps, |k, _| ocp.control_hi[k % layout.m]);
        let convex = ocp.stage_costs.iter().all(StageCost::is_convex);
        Self {
            rollout: RolloutMap::new(&ocp.spec),
            ocp,
            s,
            s_lin,
            constant,
            lo,
            hi,
            feasibility_tol: 1e-6,
            qp: BoxQpOptions::default(),
            convex,
        }
    }

    /// Tolerance for the admissibility and box checks in [`NodeObjective::evaluate`].
    pub fn with_feasibility_tol(mut self, tol: f64) -> Self {
        self.feasibility_tol = tol;
        self
    }

    pub fn ocp(&self) -> &AgentOcp {
        &self.ocp
    }

    pub fn rollout_map(&self) -> &RolloutMap {
        &self.rollout
    }

    /// Stacked controls `(u(1), …, u(T−1))` read from a trajectory.
    pub fn controls(&self, w: &DVector<f64>) -> DVector<f64> {
        let layout = self.ocp.layout();
        let mut u = DVector::zeros(layout.m * (layout.horizon - 1));
        for t in 1..layout.horizon {
            u.rows_mut((t - 1) * layout.m, layout.m).copy_from(&layout.control(w, t));
        }
        u
    }

    /// Stage-cost sum without the feasibility indicator.
    pub fn cost(&self, w: &DVector<f64>) -> f64 {
        0.5 * w.dot(&(&self.s * w)) + self.s_lin.dot(w) + self.constant
    }

    /// `argmin_u ½(Mu + w0)ᵀ P (Mu + w0) + qᵀ(Mu + w0)` over the control box.
    fn solve_controls(&self, p: &DMatrix<f64>, q: &DVector<f64>, warm: &DVector<f64>) -> homprog_core::Result<DVector<f64>> {
        let pm = p * &self.rollout.m;
        let h = self.rollout.m.transpose() * &pm;
        let g = self.rollout.m.transpose() * (p * &self.rollout.w0 + q);
        let u = solve_box_qp(&h, &g, &self.lo, &self.hi, Some(warm), &self.qp)?.x;
        Ok(self.rollout.trajectory(&u))
    }

    /// Minimizer of `J` alone; needs `R ≻ 0` on every stage.
    pub fn solve(&self) -> homprog_core::Result<DVector<f64>> {
        let warm = DVector::zeros(self.lo.len());
        self.solve_controls(&self.s, &self.s_lin, &warm)
    }
}

impl NodeObjective<f64> for AgentObjective {
    fn dim(&self) -> usize {
        self.ocp.layout().dim()
    }

    fn evaluate(&self, w: &DVector<f64>) -> f64 {
        if w.len() != self.dim() {
            return f64::INFINITY;
        }
        let u = self.controls(w);
        let scale = 1.0 + w.amax();
        let dynamics_gap = (self.rollout.trajectory(&u) - w).amax();
        let box_gap = (0..u.len())
            .map(|k| (self.lo[k] - u[k]).max(u[k] - self.hi[k]))
            .fold(0.0, f64::max);
        if dynamics_gap > self.feasibility_tol * scale || box_gap > self.feasibility_tol * scale {
            return f64::INFINITY;
        }
        self.cost(w)
    }

    fn prox(&self, v: &DVector<f64>, rho: f64) -> homprog_core::Result<DVector<f64>> {
        if v.len() != self.dim() {
            return Err(homprog_core::Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(homprog_core::Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        let n = self.dim();
        let p = &self.s + DMatrix::identity(n, n) * rho;
        let q = &self.s_lin - v * rho;
        let warm = self.controls(v);
        self.solve_controls(&p, &q, &warm)
    }

    fn is_convex(&self) -> bool {
        self.convex
    }
}
