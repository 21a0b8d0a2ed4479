//! Discrete linear time-invariant systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{shape, Result};

/// `x(t+1) = A x(t) + B u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(shape("A", "square and nonempty", format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(shape(
                "B",
                format!("{} rows and at least one column", a.nrows()),
                format!("{}x{}", b.nrows(), b.ncols()),
            ));
        }
        Ok(Self { a, b })
    }

    /// Euler-discretized double integrator in `d` dimensions with state `(p, v)`:
    /// `p⁺ = p + dt·v`, `v⁺ = v + dt·u`.
    pub fn double_integrator(d: usize, dt: f64) -> Result<Self> {
        let mut a = DMatrix::identity(2 * d, 2 * d);
        let mut b = DMatrix::zeros(2 * d, d);
        for k in 0..d {
            a[(k, d + k)] = dt;
            b[(d + k, k)] = dt;
        }
        Self::new(a, b)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    /// States `x(1) = c, …, x(k+1)` for controls `u(1), …, u(k)`.
    pub fn rollout(&self, c: &DVector<f64>, controls: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(c.clone());
        for u in controls {
            let next = self.step(states.last().expect("nonempty"), u);
            states.push(next);
        }
        states
    }
}
