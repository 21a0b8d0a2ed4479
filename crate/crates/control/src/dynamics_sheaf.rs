//! The sheaf on the path `P_{T+1}` whose Laplacian zeros are the admissible trajectories of
//! an LTI system from a fixed initial state.
//!
//! Vertex `v0` has the zero stalk, `v1 … v_{T−1}` carry `(x(t), u(t)) ∈ ℝⁿ⊕ℝᵐ` and `v_T`
//! carries `x(T)`. Edge `e0 = v0v1` compares `x(1)` against the initial state through a
//! displacement potential; edge `e_t = v_t v_{t+1}` compares `A x(t) + B u(t)` with
//! `x(t+1)` through the quadratic potential.
//!
//! With the `lower − upper` edge orientation `(δw)_{e0} = −x(1)`, so the displacement
//! target on `e0` is `−c`. Zeros of the Laplacian are exactly the trajectories with
//! `δw = b`, where `b = (−c, 0, …, 0)`.

use homprog_core::{CellularSheaf, Cochain0, EdgePotential, Graph, PotentialAssignment};
use nalgebra::{DMatrix, DVector};

use crate::error::{shape, ControlError, Result};
use crate::lti::LtiSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSheafSpec {
    pub system: LtiSystem,
    pub horizon: usize,
    pub initial_state: DVector<f64>,
}

impl DynamicsSheafSpec {
    pub fn new(system: LtiSystem, horizon: usize, initial_state: DVector<f64>) -> Result<Self> {
        if horizon < 2 {
            return Err(ControlError::Horizon(horizon));
        }
        if initial_state.len() != system.state_dim() {
            return Err(shape("initial state", system.state_dim(), initial_state.len()));
        }
        Ok(Self { system, horizon, initial_state })
    }

    pub fn layout(&self) -> TrajectoryLayout {
        TrajectoryLayout::new(self.system.state_dim(), self.system.control_dim(), self.horizon)
    }
}

/// Offsets of the stacked trajectory `(x(1), u(1), …, x(T−1), u(T−1), x(T))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryLayout {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
}

impl TrajectoryLayout {
    pub fn new(n: usize, m: usize, horizon: usize) -> Self {
        Self { n, m, horizon }
    }

    pub fn dim(&self) -> usize {
        (self.horizon - 1) * (self.n + self.m) + self.n
    }

    /// Offset of `x(t)`, `t ∈ 1..=T`.
    pub fn state_offset(&self, t: usize) -> usize {
        debug_assert!((1..=self.horizon).contains(&t));
        (t - 1) * (self.n + self.m)
    }

    /// Offset of `u(t)`, `t ∈ 1..T`.
    pub fn control_offset(&self, t: usize) -> usize {
        debug_assert!((1..self.horizon).contains(&t));
        (t - 1) * (self.n + self.m) + self.n
    }

    pub fn terminal_offset(&self) -> usize {
        self.state_offset(self.horizon)
    }

    pub fn state(&self, w: &DVector<f64>, t: usize) -> DVector<f64> {
        w.rows(self.state_offset(t), self.n).into_owned()
    }

    pub fn control(&self, w: &DVector<f64>, t: usize) -> DVector<f64> {
        w.rows(self.control_offset(t), self.m).into_owned()
    }

    pub fn pack(&self, states: &[DVector<f64>], controls: &[DVector<f64>]) -> Result<DVector<f64>> {
        if states.len() != self.horizon || controls.len() + 1 != self.horizon {
            return Err(shape(
                "trajectory",
                format!("{} states and {} controls", self.horizon, self.horizon - 1),
                format!("{} states and {} controls", states.len(), controls.len()),
            ));
        }
        let mut w = DVector::zeros(self.dim());
        for (t, x) in states.iter().enumerate() {
            if x.len() != self.n {
                return Err(shape("state", self.n, x.len()));
            }
            w.rows_mut(self.state_offset(t + 1), self.n).copy_from(x);
        }
        for (t, u) in controls.iter().enumerate() {
            if u.len() != self.m {
                return Err(shape("control", self.m, u.len()));
            }
            w.rows_mut(self.control_offset(t + 1), self.m).copy_from(u);
        }
        Ok(w)
    }

    /// Node blocks of the dynamics sheaf: the empty `v0` stalk, then `(x(t), u(t))` pairs and
    /// the terminal state.
    pub fn to_cochain(&self, w: &DVector<f64>) -> Result<Cochain0<f64>> {
        if w.len() != self.dim() {
            return Err(shape("trajectory", self.dim(), w.len()));
        }
        let mut blocks = vec![DVector::zeros(0)];
        for t in 1..self.horizon {
            blocks.push(w.rows(self.state_offset(t), self.n + self.m).into_owned());
        }
        blocks.push(w.rows(self.terminal_offset(), self.n).into_owned());
        Ok(Cochain0::from_blocks(blocks))
    }

    pub fn from_cochain(&self, x: &Cochain0<f64>) -> DVector<f64> {
        x.flatten()
    }
}

/// Sheaf and potentials on `P_{T+1}` for the given system and initial state.
pub fn build_dynamics_sheaf(spec: &DynamicsSheafSpec) -> Result<(CellularSheaf<f64>, PotentialAssignment<f64>)> {
    let (n, m, t_max) = (spec.system.state_dim(), spec.system.control_dim(), spec.horizon);
    if t_max < 2 {
        return Err(ControlError::Horizon(t_max));
    }
    let graph = Graph::path(t_max + 1)?;
    let mut node_dims = vec![0];
    node_dims.extend(std::iter::repeat_n(n + m, t_max - 1));
    node_dims.push(n);

    let first_projection = {
        let mut p = DMatrix::zeros(n, n + m);
        p.view_mut((0, 0), (n, n)).fill_with_identity();
        p
    };
    let mut step_map = DMatrix::zeros(n, n + m);
    step_map.view_mut((0, 0), (n, n)).copy_from(spec.system.a());
    step_map.view_mut((0, n), (n, m)).copy_from(spec.system.b());

    let mut restrictions = vec![(DMatrix::zeros(n, 0), first_projection.clone())];
    let mut potentials = vec![EdgePotential::displacement(-&spec.initial_state)];
    for t in 1..t_max {
        let next = if t + 1 == t_max { DMatrix::identity(n, n) } else { first_projection.clone() };
        restrictions.push((step_map.clone(), next));
        potentials.push(EdgePotential::quadratic(n));
    }
    let sheaf = CellularSheaf::new(graph, node_dims, restrictions)?;
    let potentials = PotentialAssignment::new(&sheaf, potentials)?;
    Ok((sheaf, potentials))
}

/// `max_e ‖(δw)_e − b_e‖`, the distance of `w` from satisfying the dynamics and initial
/// condition.
pub fn admissibility_residual(spec: &DynamicsSheafSpec, w: &DVector<f64>) -> Result<f64> {
    let (sheaf, potentials) = build_dynamics_sheaf(spec)?;
    let x = spec.layout().to_cochain(w)?;
    let b = potentials.minimizer_cochain()?;
    Ok((&sheaf.coboundary(&x)? - &b).max_block_norm())
}

/// Whether `w` is a zero of the dynamics-sheaf Laplacian, i.e. a rollout of the system from
/// the initial state, up to `tol`.
pub fn is_admissible(spec: &DynamicsSheafSpec, w: &DVector<f64>, tol: f64) -> Result<bool> {
    Ok(admissibility_residual(spec, w)? <= tol)
}

/// Affine parametrization `w = M u + w0` of admissible trajectories by the stacked controls
/// `u = (u(1), …, u(T−1))`.
#[derive(Debug, Clone)]
pub struct RolloutMap {
    pub m: DMatrix<f64>,
    pub w0: DVector<f64>,
}

impl RolloutMap {
    pub fn new(spec: &DynamicsSheafSpec) -> Self {
        let layout = spec.layout();
        let (n, m_dim, t_max) = (layout.n, layout.m, layout.horizon);
        let a = spec.system.a();
        let b = spec.system.b();
        let controls = m_dim * (t_max - 1);
        let mut map = DMatrix::zeros(layout.dim(), controls);
        let mut w0 = DVector::zeros(layout.dim());

        // state t as affine function of controls: x(t) = Φ_t c + Σ_{s<t} Γ_{t,s} u(s)
        let mut free = spec.initial_state.clone();
        let mut gains: Vec<DMatrix<f64>> = Vec::new();
        for t in 1..=t_max {
            let off = layout.state_offset(t);
            w0.rows_mut(off, n).copy_from(&free);
            for (s, g) in gains.iter().enumerate() {
                map.view_mut((off, s * m_dim), (n, m_dim)).copy_from(g);
            }
            if t < t_max {
                let coff = layout.control_offset(t);
                map.view_mut((coff, (t - 1) * m_dim), (m_dim, m_dim)).fill_with_identity();
                free = a * &free;
                for g in gains.iter_mut() {
                    *g = a * &*g;
                }
                gains.push(b.clone());
            }
        }
        Self { m: map, w0 }
    }

    pub fn trajectory(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.m * u + &self.w0
    }
}
