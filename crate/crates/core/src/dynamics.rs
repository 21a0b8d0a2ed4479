//! Nonlinear sheaf Laplacian `L = δᵀ ∘ ∇U ∘ δ` and the diffusion `ẋ = −α L x`.
//!
//! When every potential is strongly convex with minimizer cochain `b ∈ image δ`, the
//! diffusion converges to the orthogonal projection of `x(0)` onto `δ⁺b + ker δ`.
//! `Ψ(x) = U(δx)` is a Lyapunov function for convex potentials, and since `ẋ ∈ image δᵀ`
//! the component of `x` in `ker δ` never changes.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::cochain::{Cochain0, Cochain1};
use crate::error::{Error, Result};
use crate::potentials::PotentialAssignment;
use crate::scalar::Real;
use crate::sheaf::CellularSheaf;
use crate::solver::objective::sufficient_decrease;

/// A sheaf paired with a potential assignment on its edges.
#[derive(Debug)]
pub struct LaplacianContext<'a, T: Real> {
    sheaf: &'a CellularSheaf<T>,
    potentials: &'a PotentialAssignment<T>,
    coboundary_norm_sq: OnceLock<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams<T: Real> {
    /// Diffusivity `α`.
    pub alpha: T,
    /// Initial Euler step `h`; `None` picks `0.5 / (α λ̂ ℓ)` with `λ̂ ≈ ‖δ‖²` and `ℓ` the
    /// potentials' gradient Lipschitz constant (1 when unknown).
    pub step: Option<T>,
    /// Stationarity tolerance on `‖L x‖∞`.
    pub tol: T,
    pub max_iters: usize,
    /// Keep every iterate in [`DiffusionResult::trace`].
    pub record_trace: bool,
    pub scheme: DiffusionScheme,
}

/// How the flow `ẋ = −αLx` is discretized.
///
/// Both schemes move only along directions in `image δᵀ` and accept a step only if `Ψ`
/// does not increase, so they share the limit `proj_{ker δ}(x0) + δ⁺b` in the strongly
/// convex case. They differ in speed: the Euler step is bounded by `1/‖δ‖²`, so its rate
/// degrades with the condition number of `δᵀδ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionScheme {
    /// Fixed step `h`, halved whenever `Ψ` would increase.
    Euler,
    /// Polak–Ribière conjugate directions with a secant step along each direction and
    /// backtracking to keep `Ψ` monotone. Restarts from `−Lx` every `dim` steps.
    #[default]
    ConjugateGradient,
}

impl<T: Real> Default for DiffusionParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            step: None,
            tol: T::lit(1e-6),
            max_iters: 100_000,
            record_trace: false,
            scheme: DiffusionScheme::default(),
        }
    }
}

impl<T: Real> DiffusionParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(h) = self.step {
            if !positive(h) {
                return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
            }
        }
        if !positive(self.tol) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionResult<T: Real> {
    pub x_final: Cochain0<T>,
    /// Number of accepted Euler steps.
    pub iterations: usize,
    /// `‖L x_final‖∞`.
    pub residual: T,
    /// `Ψ(x_n) = U(δx_n)` for the initial state and every accepted step.
    pub psi_trace: Vec<T>,
    pub converged: bool,
    /// Backtracking could not find a step that decreases `Ψ`.
    pub step_underflow: bool,
    /// Step size in use when the run stopped.
    pub final_step: T,
    /// Every iterate including `x0`, when requested.
    pub trace: Option<Vec<Cochain0<T>>>,
}

impl<'a, T: Real> LaplacianContext<'a, T> {
    pub fn new(sheaf: &'a CellularSheaf<T>, potentials: &'a PotentialAssignment<T>) -> Result<Self> {
        let dims = potentials.edge_dims();
        if dims != sheaf.edge_dims() {
            return Err(Error::LayoutMismatch {
                expected: sheaf.edge_dims().to_vec(),
                found: dims,
            });
        }
        Ok(Self {
            sheaf,
            potentials,
            coboundary_norm_sq: OnceLock::new(),
        })
    }

    pub fn sheaf(&self) -> &CellularSheaf<T> {
        self.sheaf
    }

    pub fn potentials(&self) -> &PotentialAssignment<T> {
        self.potentials
    }

    /// `δᵀ ∇U(δx)`.
    pub fn apply(&self, x: &Cochain0<T>) -> Result<Cochain0<T>> {
        let y = self.sheaf.coboundary(x)?;
        self.sheaf
            .coboundary_transpose(&self.potentials.total_gradient(&y)?)
    }

    /// `Ψ(x) = U(δx)`.
    pub fn psi(&self, x: &Cochain0<T>) -> Result<T> {
        self.potentials.total_value(&self.sheaf.coboundary(x)?)
    }

    fn psi_and_laplacian(&self, x: &Cochain0<T>) -> Result<(T, Cochain0<T>)> {
        let y = self.sheaf.coboundary(x)?;
        let psi = self.potentials.total_value(&y)?;
        let lx = self
            .sheaf
            .coboundary_transpose(&self.potentials.total_gradient(&y)?)?;
        Ok((psi, lx))
    }

    /// Block `i` of `L x` from node `i`'s own state and its neighbors' states only.
    ///
    /// Each edge difference is taken in the canonical `(lower, upper)` orientation and the
    /// gradient is pulled back with the matching sign, so the result equals the global form
    /// for potentials that are not even (e.g. displacement) as well.
    pub fn apply_local(
        &self,
        i: usize,
        x_i: &DVector<T>,
        neighbor_states: &BTreeMap<usize, DVector<T>>,
    ) -> Result<DVector<T>> {
        let graph = self.sheaf.graph();
        if i >= graph.node_count() {
            return Err(Error::InvalidParameter(format!("node {i} out of range")));
        }
        let dim = self.sheaf.node_dims()[i];
        if x_i.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: x_i.len() });
        }
        let neighbors = graph.neighbors(i);
        if let Some(&other) = neighbor_states
            .keys()
            .find(|&&k| !neighbors.iter().any(|inc| inc.neighbor == k))
        {
            return Err(Error::UnexpectedNeighbor { node: i, other });
        }
        let mut out = DVector::zeros(dim);
        for inc in neighbors {
            let x_j = neighbor_states.get(&inc.neighbor).ok_or(Error::MissingNeighbor {
                node: i,
                neighbor: inc.neighbor,
            })?;
            let nd = self.sheaf.node_dims()[inc.neighbor];
            if x_j.len() != nd {
                return Err(Error::DimensionMismatch { expected: nd, found: x_j.len() });
            }
            let e = inc.edge;
            let lower = graph.edge(e).0 == i;
            let y = if lower {
                self.sheaf.edge_difference(e, x_i, x_j)
            } else {
                self.sheaf.edge_difference(e, x_j, x_i)
            };
            let g = self.potentials.get(e).gradient(&y)?;
            let sign = if lower { T::one() } else { -T::one() };
            out.gemv_tr(sign, self.sheaf.restriction(e, i), &g, T::one());
        }
        Ok(out)
    }

    /// Power-iteration estimate of `‖δ‖² = λ_max(δᵀδ)`, cached per context.
    pub fn coboundary_norm_sq(&self) -> T {
        *self.coboundary_norm_sq.get_or_init(|| {
            let dims = self.sheaf.node_dims();
            let n = self.sheaf.node_total_dim();
            if n == 0 || self.sheaf.graph().edge_count() == 0 {
                return T::zero();
            }
            let start = DVector::from_fn(n, |k, _| T::lit(1.0 + 0.5 * ((k as f64) * 0.7).sin()));
            let mut v = Cochain0::from_flat(dims, &start).expect("layout");
            let mut lambda = T::zero();
            for _ in 0..200 {
                let nv = v.norm();
                if nv == T::zero() {
                    break;
                }
                v = v.scaled(T::one() / nv);
                let w = self
                    .sheaf
                    .coboundary_transpose(&self.sheaf.coboundary(&v).expect("layout"))
                    .expect("layout");
                let next = v.dot(&w);
                let done = (next - lambda).abs() <= T::lit(1e-6) * next.abs();
                lambda = next;
                v = w;
                if done {
                    break;
                }
            }
            lambda
        })
    }

    fn default_step(&self, alpha: T) -> T {
        let lip = self.potentials.gradient_lipschitz().unwrap_or(T::one());
        let scale = alpha * self.coboundary_norm_sq() * lip;
        if scale > T::zero() {
            T::lit(0.5) / scale
        } else {
            T::one() / alpha
        }
    }

    /// Runs the flow `ẋ = −αLx` from `x0` until `‖Lx‖∞ ≤ tol` or `max_iters` steps.
    pub fn diffuse(&self, x0: &Cochain0<T>, params: &DiffusionParams<T>) -> Result<DiffusionResult<T>> {
        params.validate()?;
        x0.check_layout(self.sheaf.node_dims())?;
        match params.scheme {
            DiffusionScheme::Euler => self.diffuse_euler(x0, params),
            DiffusionScheme::ConjugateGradient => self.diffuse_cg(x0, params),
        }
    }

    fn diffuse_euler(&self, x0: &Cochain0<T>, params: &DiffusionParams<T>) -> Result<DiffusionResult<T>> {
        let alpha = params.alpha;
        let mut h = params.step.unwrap_or_else(|| self.default_step(alpha));
        let h_min = h * T::lit(2f64.powi(-50));

        let mut x = x0.clone();
        let (mut psi, mut lx) = self.psi_and_laplacian(&x)?;
        let mut residual = lx.norm_inf();
        let mut psi_trace = vec![psi];
        let mut trace = params.record_trace.then(|| vec![x.clone()]);
        let mut iterations = 0;
        let mut step_underflow = false;

        while residual > params.tol && iterations < params.max_iters {
            let accepted = loop {
                let mut candidate = x.clone();
                candidate.axpy(-h * alpha, &lx);
                let (psi_c, lx_c) = self.psi_and_laplacian(&candidate)?;
                // slack of a few ulps so progress below the resolution of Ψ is not rejected
                if psi_c <= psi + roundoff_slack(psi) {
                    break Some((candidate, psi_c, lx_c));
                }
                h *= T::lit(0.5);
                if h < h_min {
                    break None;
                }
            };
            let Some((candidate, psi_c, lx_c)) = accepted else {
                step_underflow = true;
                break;
            };
            x = candidate;
            psi = psi_c;
            lx = lx_c;
            residual = lx.norm_inf();
            iterations += 1;
            psi_trace.push(psi);
            if let Some(t) = trace.as_mut() {
                t.push(x.clone());
            }
            if !residual.is_finite() {
                break;
            }
        }

        Ok(DiffusionResult {
            converged: residual <= params.tol,
            x_final: x,
            iterations,
            residual,
            psi_trace,
            step_underflow,
            final_step: h,
            trace,
        })
    }

    fn diffuse_cg(&self, x0: &Cochain0<T>, params: &DiffusionParams<T>) -> Result<DiffusionResult<T>> {
        let half = T::lit(0.5);
        let mut t = params.step.unwrap_or_else(|| self.default_step(params.alpha)) * params.alpha;
        let t_min = t * T::lit(2f64.powi(-50));
        let restart_every = self.sheaf.node_total_dim().max(1);

        let mut x = x0.clone();
        let (mut psi, mut g) = self.psi_and_laplacian(&x)?;
        let mut g2 = g.dot(&g);
        let mut residual = g.norm_inf();
        let mut d = g.scaled(-T::one());
        let mut since_restart = 0;
        let mut psi_trace = vec![psi];
        let mut trace = params.record_trace.then(|| vec![x.clone()]);
        let mut iterations = 0;
        let mut step_underflow = false;

        while residual > params.tol && iterations < params.max_iters {
            let mut slope = g.dot(&d);
            if since_restart >= restart_every || slope >= T::zero() {
                d = g.scaled(-T::one());
                slope = -g2;
                since_restart = 0;
            }
            let accepted = loop {
                let mut probe = x.clone();
                probe.axpy(t, &d);
                let (_, g_probe) = self.psi_and_laplacian(&probe)?;
                let curvature = (g_probe.dot(&d) - slope) / t;
                let mut step = if curvature > T::zero() { -slope / curvature } else { t + t };
                let found = loop {
                    let mut candidate = x.clone();
                    candidate.axpy(step, &d);
                    let (psi_c, g_c) = self.psi_and_laplacian(&candidate)?;
                    let g2_c = g_c.dot(&g_c);
                    if psi_c.is_finite() && sufficient_decrease(psi, psi_c, -step * slope, g2, g2_c) {
                        break Some((candidate, psi_c, g_c, g2_c, step));
                    }
                    step *= half;
                    if step < t_min {
                        break None;
                    }
                };
                if found.is_some() || since_restart == 0 {
                    break found;
                }
                // a conjugate direction that makes no progress falls back to steepest descent
                d = g.scaled(-T::one());
                slope = -g2;
                since_restart = 0;
            };
            let Some((candidate, psi_c, g_c, g2_c, step)) = accepted else {
                step_underflow = true;
                break;
            };
            let beta = ((g2_c - g_c.dot(&g)) / g2).max(T::zero());
            x = candidate;
            psi = psi_c;
            d = &d.scaled(beta) - &g_c;
            g = g_c;
            g2 = g2_c;
            t = step;
            residual = g.norm_inf();
            iterations += 1;
            since_restart += 1;
            psi_trace.push(psi);
            if let Some(tr) = trace.as_mut() {
                tr.push(x.clone());
            }
        }

        Ok(DiffusionResult {
            converged: residual <= params.tol,
            x_final: x,
            iterations,
            residual,
            psi_trace,
            step_underflow,
            final_step: t / params.alpha,
            trace,
        })
    }

    /// Whether the minimizer cochain `b` lies in `image δ`; `None` when some potential has no
    /// unique minimizer.
    pub fn minimizers_in_image(&self, tol: T) -> Result<Option<bool>> {
        match self.potentials.minimizer_cochain() {
            Ok(b) => Ok(Some(self.sheaf.min_norm_preimage(&b, tol)?.in_image)),
            Err(Error::NoMinimizer { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Direct dense computation of `proj_{ker δ}(x0) + δ⁺b` through an SVD pseudoinverse.
    pub fn harmonic_projection_oracle(&self, x0: &Cochain0<T>) -> Result<Cochain0<T>> {
        x0.check_layout(self.sheaf.node_dims())?;
        let b = self.potentials.minimizer_cochain()?;
        let d = self.sheaf.assemble_coboundary_matrix();
        let pinv = pseudo_inverse(&d);
        let x = x0.flatten();
        let parallel = &x - &pinv * (&d * &x);
        let result = parallel + &pinv * b.flatten();
        Cochain0::from_flat(self.sheaf.node_dims(), &result)
    }

    /// `max_t ‖proj_{ker δ}(x(t)) − proj_{ker δ}(x(0))‖` over a recorded trace.
    pub fn kernel_conservation_check(&self, trace: &[Cochain0<T>]) -> Result<T> {
        let Some(first) = trace.first() else {
            return Ok(T::zero());
        };
        let d = self.sheaf.assemble_coboundary_matrix();
        let pinv = pseudo_inverse(&d);
        let project = |c: &Cochain0<T>| -> Result<DVector<T>> {
            c.check_layout(self.sheaf.node_dims())?;
            let x = c.flatten();
            Ok(&x - &pinv * (&d * &x))
        };
        let base = project(first)?;
        trace.iter().try_fold(T::zero(), |m, c| {
            Ok(m.max((project(c)? - &base).norm()))
        })
    }
}

pub(crate) fn roundoff_slack<T: Real>(v: T) -> T {
    T::lit(16.0) * T::eps() * v.abs()
}

/// Moore–Penrose pseudoinverse with a relative singular-value cutoff.
pub(crate) fn pseudo_inverse<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.is_empty() {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = T::lit(1e-10) * smax.max(T::one());
    svd.pseudo_inverse(cutoff).expect("cutoff is nonnegative")
}

/// `U(δx)` and `δᵀ∇U(δx)` for a cochain pair; exposed for solvers that mix in other terms.
pub(crate) fn potential_and_gradient<T: Real>(
    ctx: &LaplacianContext<'_, T>,
    x: &Cochain0<T>,
) -> Result<(T, Cochain0<T>, Cochain1<T>)> {
    let y = ctx.sheaf.coboundary(x)?;
    let psi = ctx.potentials.total_value(&y)?;
    let lx = ctx
        .sheaf
        .coboundary_transpose(&ctx.potentials.total_gradient(&y)?)?;
    Ok((psi, lx, y))
}
