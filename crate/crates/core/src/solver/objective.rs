//! Node objectives `f_i` and their proximal operators.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{norm_inf, Real};
use crate::solver::box_qp::{solve_box_qp, BoxQpOptions};

/// An extended-real objective on one node stalk.
pub trait NodeObjective<T: Real>: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// `f(x)`; `+∞` outside the effective domain.
    fn evaluate(&self, x: &DVector<T>) -> T;

    /// `argmin_x f(x) + (ρ/2)‖x − v‖²`.
    fn prox(&self, v: &DVector<T>, rho: T) -> Result<DVector<T>>;

    fn is_convex(&self) -> bool {
        true
    }

    fn is_closed_proper(&self) -> bool {
        true
    }

    /// Gradient of the smooth part, when the objective has one everywhere on its domain.
    fn gradient(&self, _x: &DVector<T>) -> Option<DVector<T>> {
        None
    }
}

fn check_prox_args<T: Real>(dim: usize, v: &DVector<T>, rho: T) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
    }
    if !(rho > T::zero() && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// `f ≡ 0`; the prox is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroObjective {
    pub dim: usize,
}

impl<T: Real> NodeObjective<T> for ZeroObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, _x: &DVector<T>) -> T {
        T::zero()
    }
    fn prox(&self, v: &DVector<T>, rho: T) -> Result<DVector<T>> {
        check_prox_args(self.dim, v, rho)?;
        Ok(v.clone())
    }
    fn gradient(&self, x: &DVector<T>) -> Option<DVector<T>> {
        Some(DVector::zeros(x.len()))
    }
}

/// `f(x) = ½xᵀHx + gᵀx + c` with symmetric `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective<T: Real> {
    h: DMatrix<T>,
    g: DVector<T>,
    c: T,
    convex: bool,
}

impl<T: Real> QuadraticObjective<T> {
    pub fn new(h: DMatrix<T>, g: DVector<T>, c: T) -> Result<Self> {
        if h.shape() != (g.len(), g.len()) {
            return Err(Error::DimensionMismatch { expected: g.len(), found: h.nrows() });
        }
        let h = (&h + h.transpose()) * T::lit(0.5);
        let convex = h.is_empty() || h.symmetric_eigenvalues().min() >= T::lit(-1e-10);
        Ok(Self { h, g, c, convex })
    }

    /// `½‖x − a‖²`.
    pub fn tracking(target: DVector<T>) -> Self {
        let n = target.len();
        let c = T::lit(0.5) * target.norm_squared();
        Self { h: DMatrix::identity(n, n), g: -target, c, convex: true }
    }

    pub fn hessian(&self) -> &DMatrix<T> {
        &self.h
    }

    pub fn linear(&self) -> &DVector<T> {
        &self.g
    }

    pub fn constant(&self) -> T {
        self.c
    }
}

impl<T: Real> NodeObjective<T> for QuadraticObjective<T> {
    fn dim(&self) -> usize {
        self.g.len()
    }
    fn evaluate(&self, x: &DVector<T>) -> T {
        T::lit(0.5) * x.dot(&(&self.h * x)) + self.g.dot(x) + self.c
    }
    fn prox(&self, v: &DVector<T>, rho: T) -> Result<DVector<T>> {
        check_prox_args(self.dim(), v, rho)?;
        let n = self.dim();
        let m = &self.h + DMatrix::identity(n, n) * rho;
        let rhs = v * rho - &self.g;
        m.cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::InvalidParameter("H + ρI is not positive definite".into()))
    }
    fn is_convex(&self) -> bool {
        self.convex
    }
    fn gradient(&self, x: &DVector<T>) -> Option<DVector<T>> {
        Some(&self.h * x + &self.g)
    }
}

/// A convex quadratic restricted to the box `lo ≤ x ≤ hi` (`+∞` outside).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQuadraticObjective<T: Real> {
    quad: QuadraticObjective<T>,
    lo: DVector<T>,
    hi: DVector<T>,
    options: BoxQpOptions<T>,
}

impl<T: Real> BoxQuadraticObjective<T> {
    pub fn new(quad: QuadraticObjective<T>, lo: DVector<T>, hi: DVector<T>) -> Result<Self> {
        let n = NodeObjective::dim(&quad);
        if lo.len() != n || hi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: lo.len().max(hi.len()) });
        }
        if let Some(k) = (0..n).find(|&k| lo[k] > hi[k]) {
            return Err(Error::InvalidParameter(format!("infeasible bounds at coordinate {k}")));
        }
        if !quad.is_convex() {
            return Err(Error::InvalidParameter("box-constrained quadratic must be convex".into()));
        }
        Ok(Self { quad, lo, hi, options: BoxQpOptions::default() })
    }

    pub fn with_options(mut self, options: BoxQpOptions<T>) -> Self {
        self.options = options;
        self
    }

    pub fn quadratic(&self) -> &QuadraticObjective<T> {
        &self.quad
    }

    pub fn bounds(&self) -> (&DVector<T>, &DVector<T>) {
        (&self.lo, &self.hi)
    }

    pub fn contains(&self, x: &DVector<T>) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(&v, (&l, &h))| v >= l && v <= h)
    }
}

impl<T: Real> NodeObjective<T> for BoxQuadraticObjective<T> {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn evaluate(&self, x: &DVector<T>) -> T {
        if self.contains(x) {
            self.quad.evaluate(x)
        } else {
            T::infinity()
        }
    }
    fn prox(&self, v: &DVector<T>, rho: T) -> Result<DVector<T>> {
        check_prox_args(self.dim(), v, rho)?;
        let n = self.dim();
        let h = self.quad.hessian() + DMatrix::identity(n, n) * rho;
        let g = self.quad.linear() - v * rho;
        let start = crate::solver::box_qp::project_box(v, &self.lo, &self.hi);
        Ok(solve_box_qp(&h, &g, &self.lo, &self.hi, Some(&start), &self.options)?.x)
    }
}

/// Armijo test on function values while the predicted decrease is resolvable in floating
/// point; below that, a strict decrease of the gradient norm.
pub(crate) fn sufficient_decrease<T: Real>(f: T, f_new: T, predicted: T, g2: T, g2_new: T) -> bool {
    if predicted > T::lit(1e3) * T::eps() * f.abs() {
        f_new <= f - T::lit(1e-4) * predicted
    } else {
        f_new <= f + T::lit(16.0) * T::eps() * f.abs() && g2_new < g2
    }
}

type ValueFn<T> = dyn Fn(&DVector<T>) -> T + Send + Sync;
type GradFn<T> = dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync;

/// A smooth objective given by closures; its prox is computed by gradient descent with
/// Armijo backtracking on `f(x) + (ρ/2)‖x − v‖²`.
#[derive(Clone)]
pub struct SmoothObjective<T: Real> {
    dim: usize,
    value: Arc<ValueFn<T>>,
    grad: Arc<GradFn<T>>,
    convex: bool,
    tol: T,
    max_iters: usize,
}

impl<T: Real> fmt::Debug for SmoothObjective<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothObjective")
            .field("dim", &self.dim)
            .field("convex", &self.convex)
            .finish_non_exhaustive()
    }
}

impl<T: Real> SmoothObjective<T> {
    pub fn new(
        dim: usize,
        convex: bool,
        value: impl Fn(&DVector<T>) -> T + Send + Sync + 'static,
        grad: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            grad: Arc::new(grad),
            convex,
            tol: T::lit(1e-10),
            max_iters: 100_000,
        }
    }

    pub fn with_tolerance(mut self, tol: T, max_iters: usize) -> Self {
        self.tol = tol;
        self.max_iters = max_iters;
        self
    }
}

impl<T: Real> NodeObjective<T> for SmoothObjective<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, x: &DVector<T>) -> T {
        (self.value)(x)
    }
    fn prox(&self, v: &DVector<T>, rho: T) -> Result<DVector<T>> {
        check_prox_args(self.dim, v, rho)?;
        let half = T::lit(0.5);
        let phi = |x: &DVector<T>| (self.value)(x) + half * rho * (x - v).norm_squared();
        let grad_phi = |x: &DVector<T>| (self.grad)(x) + (x - v) * rho;
        let mut x = v.clone();
        let mut fx = phi(&x);
        let mut g = grad_phi(&x);
        let mut step = T::one() / rho;
        for _ in 0..self.max_iters {
            if norm_inf(&g) <= self.tol {
                return Ok(x);
            }
            let gn = g.norm_squared();
            let mut accepted = false;
            for _ in 0..200 {
                let cand = &x - &g * step;
                let fc = phi(&cand);
                let gc = grad_phi(&cand);
                if sufficient_decrease(fx, fc, step * gn, gn, gc.norm_squared()) {
                    x = cand;
                    fx = fc;
                    g = gc;
                    step *= T::lit(1.5);
                    accepted = true;
                    break;
                }
                step *= T::lit(0.5);
            }
            if !accepted {
                break;
            }
        }
        let g = grad_phi(&x);
        if norm_inf(&g) <= self.tol {
            return Ok(x);
        }
        Err(Error::NotConverged {
            iterations: self.max_iters,
            residual: norm_inf(&g).as_f64(),
        })
    }
    fn is_convex(&self) -> bool {
        self.convex
    }
    fn gradient(&self, x: &DVector<T>) -> Option<DVector<T>> {
        Some((self.grad)(x))
    }
}
