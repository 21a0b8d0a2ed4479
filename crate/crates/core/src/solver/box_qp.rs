//! Box-constrained convex quadratic programs `min ½xᵀHx + gᵀx  s.t. lo ≤ x ≤ hi`.
//!
//! Solved by a primal active-set method, which terminates after finitely many working-set
//! changes. Solutions are certified by the projected-gradient residual
//! `‖x − Π(x − ∇q(x))‖∞`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{norm_inf, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxQpOptions<T: Real> {
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Real> Default for BoxQpOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoxQpSolution<T: Real> {
    pub x: DVector<T>,
    pub iterations: usize,
    /// Projected-gradient residual at `x`.
    pub residual: T,
}

pub fn project_box<T: Real>(x: &DVector<T>, lo: &DVector<T>, hi: &DVector<T>) -> DVector<T> {
    x.zip_zip_map(lo, hi, |v, l, h| v.max(l).min(h))
}

/// `‖x − Π(x − (Hx + g))‖∞`, zero exactly at KKT points.
pub fn projected_gradient_residual<T: Real>(
    h: &DMatrix<T>,
    g: &DVector<T>,
    lo: &DVector<T>,
    hi: &DVector<T>,
    x: &DVector<T>,
) -> T {
    let grad = h * x + g;
    norm_inf(&(x - project_box(&(x - grad), lo, hi)))
}

/// Primal active-set method: each iteration minimizes over the free coordinates with the
/// working bounds held, steps until the first blocking bound, and releases the bound with
/// the most negative multiplier once the subspace minimizer is reached. `H` must be
/// positive definite on every free subspace the method visits (any `H ≻ 0` qualifies).
pub fn solve_box_qp<T: Real>(
    h: &DMatrix<T>,
    g: &DVector<T>,
    lo: &DVector<T>,
    hi: &DVector<T>,
    x0: Option<&DVector<T>>,
    opts: &BoxQpOptions<T>,
) -> Result<BoxQpSolution<T>> {
    let n = g.len();
    if h.shape() != (n, n) || lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.nrows().max(lo.len()).max(hi.len()),
        });
    }
    if let Some(k) = (0..n).find(|&k| lo[k] > hi[k]) {
        return Err(Error::InvalidParameter(format!(
            "infeasible bounds at coordinate {k}: {} > {}",
            lo[k], hi[k]
        )));
    }
    if n == 0 {
        return Ok(BoxQpSolution { x: DVector::zeros(0), iterations: 0, residual: T::zero() });
    }

    let mut x = project_box(x0.unwrap_or(&DVector::zeros(n)), lo, hi);
    let mut state: Vec<Bound> = (0..n)
        .map(|k| {
            if x[k] <= lo[k] {
                Bound::Lower
            } else if x[k] >= hi[k] {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();
    let mut at_subspace_min = false;
    let mut iterations = 0;

    let done = loop {
        if iterations >= opts.max_iters {
            break false;
        }
        iterations += 1;
        let grad = h * &x + g;

        if at_subspace_min {
            // multipliers of the working bounds: λ = ∇q at a lower bound, −∇q at an upper one
            let release = (0..n)
                .filter(|&k| lo[k] < hi[k])
                .filter_map(|k| match state[k] {
                    Bound::Lower => Some((k, grad[k])),
                    Bound::Upper => Some((k, -grad[k])),
                    Bound::Free => None,
                })
                .filter(|&(_, lambda)| lambda < -opts.tol)
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            match release {
                Some((k, _)) => {
                    state[k] = Bound::Free;
                    at_subspace_min = false;
                    continue;
                }
                None => break true,
            }
        }

        let free: Vec<usize> = (0..n).filter(|&k| state[k] == Bound::Free).collect();
        if free.is_empty() {
            at_subspace_min = true;
            continue;
        }
        let h_ff = DMatrix::from_fn(free.len(), free.len(), |r, c| h[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| -grad[free[r]]);
        let step = h_ff
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("box QP Hessian is not positive definite".into()))?
            .solve(&rhs);

        let mut alpha = T::one();
        let mut blocking = None;
        for (r, &k) in free.iter().enumerate() {
            let p = step[r];
            let room = if p < T::zero() {
                (lo[k] - x[k]) / p
            } else if p > T::zero() {
                (hi[k] - x[k]) / p
            } else {
                continue;
            };
            if room < alpha {
                alpha = room.max(T::zero());
                blocking = Some((k, if p < T::zero() { Bound::Lower } else { Bound::Upper }));
            }
        }
        for (r, &k) in free.iter().enumerate() {
            x[k] += alpha * step[r];
        }
        x = project_box(&x, lo, hi);
        match blocking {
            Some((k, side)) => {
                x[k] = if side == Bound::Lower { lo[k] } else { hi[k] };
                state[k] = side;
            }
            None => at_subspace_min = true,
        }
    };

    let residual = projected_gradient_residual(h, g, lo, hi, &x);
    if !done || residual > opts.tol {
        return Err(Error::NotConverged {
            iterations,
            residual: residual.as_f64(),
        });
    }
    Ok(BoxQpSolution { x, iterations, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}
