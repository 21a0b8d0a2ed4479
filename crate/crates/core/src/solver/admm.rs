//! Distributed-structure ADMM for homological programs.
//!
//! Scaled-dual iteration on the consensus form `min Σf_i(x_i) + χ_C(z)  s.t. x = z`:
//!
//! ```text
//! x_i ← prox_{f_i}(z_i − y_i, ρ)          (per node)
//! z   ← Π_C(x + y)                        (sheaf diffusion)
//! stop if ‖x − z‖∞ < ε₁
//! y_i ← y_i + x_i − z_i                   (per node)
//! ```
//!
//! When the potentials are not all strongly convex the z-step instead minimizes
//! `U(δz) + (ρ/2)‖x + y − z‖²`, which solves the relaxed problem `Σf_i + U∘δ`.

use std::io::{self, Write};

use crate::cochain::Cochain0;
use crate::dynamics::{potential_and_gradient, DiffusionParams, DiffusionResult, LaplacianContext};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::objective::sufficient_decrease;
use crate::solver::program::{HomologicalProgram, ZUpdateMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams<T: Real> {
    pub rho: T,
    /// Diffusivity of the projection step.
    pub alpha: T,
    /// Primal stopping tolerance on `‖x − z‖∞`.
    pub eps1: T,
    /// Inner tolerance: `‖Lz‖∞` for projection, `‖∇g(z)‖∞` for the relaxed step.
    pub eps2: T,
    /// Maximum outer iterations `K`.
    pub max_iters: usize,
    pub diffusion_max_iters: usize,
    pub z_mode: ZUpdateMode,
    /// When set, the inner tolerance at outer iteration `k` is `max(eps2, start · 2⁻ᵏ)`.
    pub inner_tol_start: Option<T>,
}

impl<T: Real> Default for AdmmParams<T> {
    fn default() -> Self {
        Self {
            rho: T::one(),
            alpha: T::one(),
            eps1: T::lit(1e-4),
            eps2: T::lit(1e-6),
            max_iters: 500,
            diffusion_max_iters: 100_000,
            z_mode: ZUpdateMode::Auto,
            inner_tol_start: None,
        }
    }
}

impl<T: Real> AdmmParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        for (name, v) in [("rho", self.rho), ("alpha", self.alpha), ("eps1", self.eps1), ("eps2", self.eps2)] {
            if !positive(v) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 || self.diffusion_max_iters == 0 {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        if let Some(s) = self.inner_tol_start {
            if !positive(s) {
                return Err(Error::InvalidParameter(format!("inner_tol_start must be positive, got {s}")));
            }
        }
        Ok(())
    }

    fn inner_tol(&self, k: usize) -> T {
        match self.inner_tol_start {
            Some(start) => (start * T::lit(0.5f64.powi(k.min(1000) as i32))).max(self.eps2),
            None => self.eps2,
        }
    }

    fn diffusion(&self, tol: T) -> DiffusionParams<T> {
        DiffusionParams {
            alpha: self.alpha,
            step: None,
            tol,
            max_iters: self.diffusion_max_iters,
            record_trace: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmIterate<T: Real> {
    /// 1-based outer iteration.
    pub iter: usize,
    /// `‖x − z‖∞`.
    pub primal_residual: T,
    /// `ρ‖z_{k+1} − z_k‖∞`.
    pub dual_residual: T,
    /// `Σ f_i(z_i)`; `+∞` when `z` leaves an objective's domain.
    pub objective: T,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmmStatus {
    /// `‖x − z‖∞ < ε₁` reached at this iteration.
    Converged(usize),
    /// `K` iterations ran without meeting `ε₁`.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmReport<T: Real> {
    pub iterations: Vec<AdmmIterate<T>>,
    pub status: AdmmStatus,
    pub mode: ZUpdateMode,
    /// Number of z-updates whose inner solve stopped before its tolerance.
    pub inner_unconverged: usize,
}

impl<T: Real> AdmmReport<T> {
    pub fn final_primal_residual(&self) -> Option<T> {
        self.iterations.last().map(|r| r.primal_residual)
    }

    pub fn converged(&self) -> bool {
        matches!(self.status, AdmmStatus::Converged(_))
    }

    /// CSV with header `iter,primal_res,dual_res,objective`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iter,primal_res,dual_res,objective")?;
        for r in &self.iterations {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e}",
                r.iter, r.primal_residual, r.dual_residual, r.objective
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome<T: Real> {
    pub z: Cochain0<T>,
    pub y: Cochain0<T>,
    /// Last x-update (each block is feasible for its own objective).
    pub x: Cochain0<T>,
    pub report: AdmmReport<T>,
}

/// Block `i` is `prox_{f_i}(z_i − y_i, ρ)`.
pub fn x_update<T: Real>(
    prog: &HomologicalProgram<T>,
    z: &Cochain0<T>,
    y: &Cochain0<T>,
    rho: T,
) -> Result<Cochain0<T>> {
    let dims = prog.sheaf().node_dims();
    z.check_layout(dims)?;
    y.check_layout(dims)?;
    if !(rho > T::zero()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let blocks = prog
        .objectives()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.prox(&(z.block(i) - y.block(i)), rho)
                .map_err(|e| Error::Prox { node: i, reason: e.to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Cochain0::from_blocks(blocks))
}

/// Projection of `v` onto `C = ker L^{∇U}` by running the diffusion to `params.tol`.
pub fn z_update_projection<T: Real>(
    prog: &HomologicalProgram<T>,
    v: &Cochain0<T>,
    params: &DiffusionParams<T>,
) -> Result<DiffusionResult<T>> {
    if let Some(e) = (0..prog.potentials().potentials().len())
        .find(|&e| !prog.potentials().get(e).is_strongly_convex())
    {
        return Err(Error::NoMinimizer { edge: e, kind: prog.potentials().get(e).kind() });
    }
    let ctx = LaplacianContext::new(prog.sheaf(), prog.potentials())?;
    projection_with(&ctx, v, params)
}

fn projection_with<T: Real>(
    ctx: &LaplacianContext<'_, T>,
    v: &Cochain0<T>,
    params: &DiffusionParams<T>,
) -> Result<DiffusionResult<T>> {
    let r = ctx.diffuse(v, params)?;
    if !r.converged {
        return Err(Error::NotConverged {
            iterations: r.iterations,
            residual: r.residual.as_f64(),
        });
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct RelaxedResult<T: Real> {
    pub z: Cochain0<T>,
    pub iterations: usize,
    /// `‖∇g(z)‖∞`.
    pub grad_norm: T,
    pub converged: bool,
}

/// Minimizes `g(z) = U(δz) + (ρ/2)‖v − z‖²` by gradient descent with Armijo backtracking,
/// `∇g(z) = L z + ρ(z − v)`. Returns the last (lowest-`g`) iterate, flagged when the cap hits.
pub fn z_update_relaxed<T: Real>(
    prog: &HomologicalProgram<T>,
    v: &Cochain0<T>,
    rho: T,
    tol: T,
    max_iters: usize,
) -> Result<RelaxedResult<T>> {
    let ctx = LaplacianContext::new(prog.sheaf(), prog.potentials())?;
    relaxed_with(&ctx, v, rho, tol, max_iters, v)
}

fn relaxed_with<T: Real>(
    ctx: &LaplacianContext<'_, T>,
    v: &Cochain0<T>,
    rho: T,
    tol: T,
    max_iters: usize,
    start: &Cochain0<T>,
) -> Result<RelaxedResult<T>> {
    if !(rho > T::zero()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    v.check_layout(ctx.sheaf().node_dims())?;
    let half = T::lit(0.5);
    let eval = |z: &Cochain0<T>| -> Result<(T, Cochain0<T>)> {
        let (u, lz, _) = potential_and_gradient(ctx, z)?;
        let diff = z - v;
        let mut grad = lz;
        grad.axpy(rho, &diff);
        Ok((u + half * rho * diff.dot(&diff), grad))
    };
    let lip = ctx.potentials().gradient_lipschitz().unwrap_or(T::one());
    let mut step = T::one() / (rho + ctx.coboundary_norm_sq() * lip);
    let mut z = start.clone();
    let (mut gz, mut grad) = eval(&z)?;
    let mut grad_norm = grad.norm_inf();
    let mut iterations = 0;
    while grad_norm > tol && iterations < max_iters {
        let gn2 = grad.dot(&grad);
        let mut accepted = false;
        for _ in 0..200 {
            let mut cand = z.clone();
            cand.axpy(-step, &grad);
            let (gc, grad_c) = eval(&cand)?;
            if sufficient_decrease(gz, gc, step * gn2, gn2, grad_c.dot(&grad_c)) {
                z = cand;
                gz = gc;
                grad = grad_c;
                step *= T::lit(1.5);
                accepted = true;
                break;
            }
            step *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
        grad_norm = grad.norm_inf();
        iterations += 1;
    }
    Ok(RelaxedResult {
        z,
        iterations,
        grad_norm,
        converged: grad_norm <= tol,
    })
}

/// `y_i + x_i − z_i` for every block.
pub fn y_update<T: Real>(y: &Cochain0<T>, x: &Cochain0<T>, z: &Cochain0<T>) -> Cochain0<T> {
    &(y + x) - z
}

/// Runs at most `K` outer iterations from warm starts `z0`, `y0` (zero when `None`).
pub fn admm_solve<T: Real>(
    prog: &HomologicalProgram<T>,
    params: &AdmmParams<T>,
    z0: Option<&Cochain0<T>>,
    y0: Option<&Cochain0<T>>,
) -> Result<AdmmOutcome<T>> {
    params.validate()?;
    let dims = prog.sheaf().node_dims();
    let mut z = z0.cloned().unwrap_or_else(|| prog.sheaf().zero_cochain0());
    let mut y = y0.cloned().unwrap_or_else(|| prog.sheaf().zero_cochain0());
    z.check_layout(dims)?;
    y.check_layout(dims)?;

    let mode = match params.z_mode {
        ZUpdateMode::Auto => prog.check_convexity().recommended_mode(),
        ZUpdateMode::Projection => {
            if !prog.potentials().all_strongly_convex() {
                return Err(Error::InvalidProgram(
                    "projection z-update needs strongly convex potentials".into(),
                ));
            }
            ZUpdateMode::Projection
        }
        ZUpdateMode::Relaxed => ZUpdateMode::Relaxed,
    };
    let ctx = LaplacianContext::new(prog.sheaf(), prog.potentials())?;

    let mut records = Vec::with_capacity(params.max_iters);
    let mut status = AdmmStatus::MaxIterations;
    let mut inner_unconverged = 0;
    let mut x = z.clone();
    for k in 1..=params.max_iters {
        let wrap = |e: Error| Error::Admm { iteration: k, source: Box::new(e) };
        x = x_update(prog, &z, &y, params.rho).map_err(wrap)?;
        let v = &x + &y;
        let tol = params.inner_tol(k - 1);
        let (z_new, inner_iterations, inner_converged) = match mode {
            ZUpdateMode::Relaxed => {
                let r = relaxed_with(&ctx, &v, params.rho, tol, params.diffusion_max_iters, &z)
                    .map_err(wrap)?;
                (r.z, r.iterations, r.converged)
            }
            _ => {
                let r = projection_with(&ctx, &v, &params.diffusion(tol)).map_err(wrap)?;
                (r.x_final, r.iterations, r.converged)
            }
        };
        if !inner_converged {
            inner_unconverged += 1;
        }
        let dual_residual = params.rho * (&z_new - &z).norm_inf();
        z = z_new;
        let primal_residual = (&x - &z).norm_inf();
        records.push(AdmmIterate {
            iter: k,
            primal_residual,
            dual_residual,
            objective: prog.objective_value(&z)?,
            inner_iterations,
            inner_converged,
        });
        if primal_residual < params.eps1 {
            status = AdmmStatus::Converged(k);
            break;
        }
        y = y_update(&y, &x, &z);
    }

    Ok(AdmmOutcome {
        z,
        y,
        x,
        report: AdmmReport {
            iterations: records,
            status,
            mode,
            inner_unconverged,
        },
    })
}
