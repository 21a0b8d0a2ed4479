//! Edge potentials `U_e` and their per-edge assignment over a sheaf.
//!
//! | kind                  | `U(y)`                     | `∇U(y)`                 |
//! |-----------------------|----------------------------|-------------------------|
//! | `zero`                | `0`                        | `0`                     |
//! | `quadratic`           | `½‖y‖²`                    | `y`                     |
//! | `matrix_weighted`     | `yᵀAy`                     | `(A + Aᵀ)y`             |
//! | `dissensus`           | `−½‖y‖²`                   | `−y`                    |
//! | `displacement`        | `½‖y − b‖²`                | `y − b`                 |
//! | `fixed_distance_sq`   | `(‖y‖² − r²)²`             | `4(‖y‖² − r²)y`         |
//! | `fixed_distance_norm` | `½(‖y‖ − r)²`              | `(1 − r/‖y‖)y`          |
//!
//! `blockwise` sums potentials acting on disjoint coordinate ranges of the edge stalk and
//! `scaled` multiplies a potential by a positive weight.

use nalgebra::{DMatrix, DVector};

use crate::cochain::Cochain1;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sheaf::CellularSheaf;

const EIG_TOL: f64 = 1e-10;

/// A potential acting on the coordinates `offset..offset + potential.dim()` of a larger stalk.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialBlock<T: Real> {
    pub offset: usize,
    pub potential: EdgePotential<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgePotential<T: Real> {
    Zero { dim: usize },
    Quadratic { dim: usize },
    MatrixWeighted { a: DMatrix<T> },
    Dissensus { dim: usize },
    Displacement { target: DVector<T> },
    FixedDistanceSq { dim: usize, radius: T },
    FixedDistanceNorm { dim: usize, radius: T },
    Blockwise { dim: usize, blocks: Vec<PotentialBlock<T>> },
    Scaled { weight: T, inner: Box<EdgePotential<T>> },
}

impl<T: Real> EdgePotential<T> {
    pub fn zero(dim: usize) -> Self {
        Self::Zero { dim }
    }

    pub fn quadratic(dim: usize) -> Self {
        Self::Quadratic { dim }
    }

    pub fn dissensus(dim: usize) -> Self {
        Self::Dissensus { dim }
    }

    pub fn matrix_weighted(a: DMatrix<T>) -> Self {
        Self::MatrixWeighted { a }
    }

    pub fn displacement(target: DVector<T>) -> Self {
        Self::Displacement { target }
    }

    pub fn fixed_distance_sq(dim: usize, radius: T) -> Self {
        Self::FixedDistanceSq { dim, radius }
    }

    pub fn fixed_distance_norm(dim: usize, radius: T) -> Self {
        Self::FixedDistanceNorm { dim, radius }
    }

    pub fn blockwise(dim: usize, blocks: Vec<PotentialBlock<T>>) -> Self {
        Self::Blockwise { dim, blocks }
    }

    pub fn scaled(weight: T, inner: EdgePotential<T>) -> Self {
        Self::Scaled {
            weight,
            inner: Box::new(inner),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Zero { .. } => "zero",
            Self::Quadratic { .. } => "quadratic",
            Self::MatrixWeighted { .. } => "matrix_weighted",
            Self::Dissensus { .. } => "dissensus",
            Self::Displacement { .. } => "displacement",
            Self::FixedDistanceSq { .. } => "fixed_distance_sq",
            Self::FixedDistanceNorm { .. } => "fixed_distance_norm",
            Self::Blockwise { .. } => "blockwise",
            Self::Scaled { .. } => "scaled",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Zero { dim }
            | Self::Quadratic { dim }
            | Self::Dissensus { dim }
            | Self::FixedDistanceSq { dim, .. }
            | Self::FixedDistanceNorm { dim, .. }
            | Self::Blockwise { dim, .. } => *dim,
            Self::MatrixWeighted { a } => a.nrows(),
            Self::Displacement { target } => target.len(),
            Self::Scaled { inner, .. } => inner.dim(),
        }
    }

    /// Checks parameters: positive dims, square `A`, positive radii and weights, disjoint blocks.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPotential(msg));
        if self.dim() == 0 {
            return bad(format!("{} potential has zero dimension", self.kind()));
        }
        match self {
            Self::MatrixWeighted { a } if !a.is_square() => {
                bad(format!("matrix_weighted needs a square matrix, got {:?}", a.shape()))
            }
            Self::FixedDistanceSq { radius, .. } | Self::FixedDistanceNorm { radius, .. }
                if !(*radius > T::zero() && radius.is_finite()) =>
            {
                bad(format!("{} radius must be positive, got {radius}", self.kind()))
            }
            Self::Scaled { weight, inner } => {
                if !(*weight > T::zero() && weight.is_finite()) {
                    return bad(format!("scaled weight must be positive, got {weight}"));
                }
                inner.validate()
            }
            Self::Blockwise { dim, blocks } => {
                let mut covered = vec![false; *dim];
                for (k, b) in blocks.iter().enumerate() {
                    b.potential.validate()?;
                    let end = b.offset + b.potential.dim();
                    if end > *dim {
                        return bad(format!("block {k} covers {}..{end}, beyond dimension {dim}", b.offset));
                    }
                    for c in &mut covered[b.offset..end] {
                        if *c {
                            return bad(format!("block {k} overlaps an earlier block"));
                        }
                        *c = true;
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn check_len(&self, y: &DVector<T>) -> Result<()> {
        if y.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            })
        }
    }

    pub fn value(&self, y: &DVector<T>) -> Result<T> {
        self.check_len(y)?;
        Ok(self.value_unchecked(y))
    }

    fn value_unchecked(&self, y: &DVector<T>) -> T {
        let half = T::lit(0.5);
        match self {
            Self::Zero { .. } => T::zero(),
            Self::Quadratic { .. } => half * y.norm_squared(),
            Self::MatrixWeighted { a } => y.dot(&(a * y)),
            Self::Dissensus { .. } => -half * y.norm_squared(),
            Self::Displacement { target } => half * (y - target).norm_squared(),
            Self::FixedDistanceSq { radius, .. } => {
                let gap = y.norm_squared() - *radius * *radius;
                gap * gap
            }
            Self::FixedDistanceNorm { radius, .. } => {
                let gap = y.norm() - *radius;
                half * gap * gap
            }
            Self::Blockwise { blocks, .. } => blocks.iter().fold(T::zero(), |acc, b| {
                let part = y.rows(b.offset, b.potential.dim()).into_owned();
                acc + b.potential.value_unchecked(&part)
            }),
            Self::Scaled { weight, inner } => *weight * inner.value_unchecked(y),
        }
    }

    /// Gradient `∇U(y)`. At the singular point `y = 0` of `fixed_distance_norm` the zero
    /// subgradient is returned; [`is_smooth_at`](Self::is_smooth_at) reports that case.
    pub fn gradient(&self, y: &DVector<T>) -> Result<DVector<T>> {
        self.check_len(y)?;
        Ok(self.gradient_unchecked(y))
    }

    /// Gradient together with a flag that is false at a point of non-differentiability.
    pub fn gradient_with_flag(&self, y: &DVector<T>) -> Result<(DVector<T>, bool)> {
        let g = self.gradient(y)?;
        Ok((g, self.is_smooth_at(y)))
    }

    fn gradient_unchecked(&self, y: &DVector<T>) -> DVector<T> {
        match self {
            Self::Zero { dim } => DVector::zeros(*dim),
            Self::Quadratic { .. } => y.clone(),
            Self::MatrixWeighted { a } => a * y + a.tr_mul(y),
            Self::Dissensus { .. } => -y,
            Self::Displacement { target } => y - target,
            Self::FixedDistanceSq { radius, .. } => {
                let gap = y.norm_squared() - *radius * *radius;
                y * (T::lit(4.0) * gap)
            }
            Self::FixedDistanceNorm { radius, .. } => {
                let n = y.norm();
                if n == T::zero() {
                    DVector::zeros(y.len())
                } else {
                    y * (T::one() - *radius / n)
                }
            }
            Self::Blockwise { dim, blocks } => {
                let mut g = DVector::zeros(*dim);
                for b in blocks {
                    let d = b.potential.dim();
                    let part = y.rows(b.offset, d).into_owned();
                    g.rows_mut(b.offset, d)
                        .copy_from(&b.potential.gradient_unchecked(&part));
                }
                g
            }
            Self::Scaled { weight, inner } => inner.gradient_unchecked(y) * *weight,
        }
    }

    pub fn is_smooth_at(&self, y: &DVector<T>) -> bool {
        match self {
            Self::FixedDistanceNorm { .. } => y.norm() > T::zero(),
            Self::Blockwise { blocks, .. } => blocks.iter().all(|b| {
                let d = b.potential.dim();
                b.offset + d <= y.len() && b.potential.is_smooth_at(&y.rows(b.offset, d).into_owned())
            }),
            Self::Scaled { inner, .. } => inner.is_smooth_at(y),
            _ => true,
        }
    }

    /// Differentiable everywhere.
    pub fn is_differentiable(&self) -> bool {
        match self {
            Self::FixedDistanceNorm { .. } => false,
            Self::Blockwise { blocks, .. } => blocks.iter().all(|b| b.potential.is_differentiable()),
            Self::Scaled { inner, .. } => inner.is_differentiable(),
            _ => true,
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Self::Zero { .. } | Self::Quadratic { .. } | Self::Displacement { .. } => true,
            Self::MatrixWeighted { a } => min_sym_eigenvalue(a) >= T::lit(-EIG_TOL),
            Self::Dissensus { .. } | Self::FixedDistanceSq { .. } | Self::FixedDistanceNorm { .. } => {
                false
            }
            Self::Blockwise { blocks, .. } => blocks.iter().all(|b| b.potential.is_convex()),
            Self::Scaled { inner, .. } => inner.is_convex(),
        }
    }

    pub fn is_strongly_convex(&self) -> bool {
        match self {
            Self::Quadratic { .. } | Self::Displacement { .. } => true,
            Self::MatrixWeighted { a } => min_sym_eigenvalue(a) > T::lit(EIG_TOL),
            Self::Blockwise { dim, blocks } => {
                let covered: usize = blocks.iter().map(|b| b.potential.dim()).sum();
                covered == *dim && blocks.iter().all(|b| b.potential.is_strongly_convex())
            }
            Self::Scaled { inner, .. } => inner.is_strongly_convex(),
            _ => false,
        }
    }

    /// The unique minimizer `b_e` (with `U(b_e) = 0`) of a strongly convex potential.
    pub fn minimizer(&self) -> Option<DVector<T>> {
        if !self.is_strongly_convex() {
            return None;
        }
        match self {
            Self::Quadratic { dim } => Some(DVector::zeros(*dim)),
            Self::MatrixWeighted { a } => Some(DVector::zeros(a.nrows())),
            Self::Displacement { target } => Some(target.clone()),
            Self::Blockwise { dim, blocks } => {
                let mut b = DVector::zeros(*dim);
                for blk in blocks {
                    b.rows_mut(blk.offset, blk.potential.dim())
                        .copy_from(&blk.potential.minimizer()?);
                }
                Some(b)
            }
            Self::Scaled { inner, .. } => inner.minimizer(),
            _ => None,
        }
    }

    /// `y ↦ U(−y)`: the same potential seen from the opposite edge orientation.
    pub fn reflected(&self) -> Self {
        match self {
            Self::Displacement { target } => Self::Displacement { target: -target },
            Self::Blockwise { dim, blocks } => Self::Blockwise {
                dim: *dim,
                blocks: blocks
                    .iter()
                    .map(|b| PotentialBlock { offset: b.offset, potential: b.potential.reflected() })
                    .collect(),
            },
            Self::Scaled { weight, inner } => Self::Scaled { weight: *weight, inner: Box::new(inner.reflected()) },
            // the remaining kinds are even functions of y
            other => other.clone(),
        }
    }

    /// Global Lipschitz constant of `∇U` when one exists.
    pub fn gradient_lipschitz(&self) -> Option<T> {
        match self {
            Self::Zero { .. } => Some(T::zero()),
            Self::Quadratic { .. } | Self::Dissensus { .. } | Self::Displacement { .. } => Some(T::one()),
            Self::MatrixWeighted { a } => {
                let sym = a + a.transpose();
                Some(sym.symmetric_eigenvalues().iter().fold(T::zero(), |m, v| m.max(v.abs())))
            }
            Self::FixedDistanceSq { .. } | Self::FixedDistanceNorm { .. } => None,
            Self::Blockwise { blocks, .. } => blocks
                .iter()
                .try_fold(T::zero(), |m, b| Some(m.max(b.potential.gradient_lipschitz()?))),
            Self::Scaled { weight, inner } => inner.gradient_lipschitz().map(|l| l * *weight),
        }
    }
}

fn min_sym_eigenvalue<T: Real>(a: &DMatrix<T>) -> T {
    if a.is_empty() {
        return T::zero();
    }
    let sym = (a + a.transpose()) * T::lit(0.5);
    sym.symmetric_eigenvalues().min()
}

/// One potential per edge of a sheaf; `U(y) = Σ_e U_e(y_e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialAssignment<T: Real> {
    potentials: Vec<EdgePotential<T>>,
}

impl<T: Real> PotentialAssignment<T> {
    pub fn new(sheaf: &CellularSheaf<T>, potentials: Vec<EdgePotential<T>>) -> Result<Self> {
        let dims = sheaf.edge_dims();
        if potentials.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                found: potentials.len(),
            });
        }
        for (e, (p, &d)) in potentials.iter().zip(dims).enumerate() {
            p.validate()
                .map_err(|err| Error::InvalidPotential(format!("edge {e}: {err}")))?;
            if p.dim() != d {
                return Err(Error::InvalidPotential(format!(
                    "edge {e}: {} potential has dimension {}, edge stalk has {d}",
                    p.kind(),
                    p.dim()
                )));
            }
        }
        Ok(Self { potentials })
    }

    /// The same potential kind (`½‖y‖²`) on every edge.
    pub fn quadratic(sheaf: &CellularSheaf<T>) -> Self {
        let potentials = sheaf
            .edge_dims()
            .iter()
            .map(|&d| EdgePotential::quadratic(d))
            .collect();
        Self { potentials }
    }

    pub fn potentials(&self) -> &[EdgePotential<T>] {
        &self.potentials
    }

    pub fn get(&self, e: usize) -> &EdgePotential<T> {
        &self.potentials[e]
    }

    pub fn edge_dims(&self) -> Vec<usize> {
        self.potentials.iter().map(EdgePotential::dim).collect()
    }

    pub fn total_value(&self, y: &Cochain1<T>) -> Result<T> {
        y.check_layout(&self.edge_dims())?;
        Ok(self
            .potentials
            .iter()
            .zip(y.blocks())
            .fold(T::zero(), |acc, (p, b)| acc + p.value_unchecked(b)))
    }

    pub fn total_gradient(&self, y: &Cochain1<T>) -> Result<Cochain1<T>> {
        y.check_layout(&self.edge_dims())?;
        Ok(Cochain1::from_blocks(
            self.potentials
                .iter()
                .zip(y.blocks())
                .map(|(p, b)| p.gradient_unchecked(b))
                .collect(),
        ))
    }

    /// Stacked minimizers `b = vec(b_1, …, b_|E|)`; fails on the first edge without one.
    pub fn minimizer_cochain(&self) -> Result<Cochain1<T>> {
        let blocks = self
            .potentials
            .iter()
            .enumerate()
            .map(|(e, p)| {
                p.minimizer().ok_or(Error::NoMinimizer {
                    edge: e,
                    kind: p.kind(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Cochain1::from_blocks(blocks))
    }

    pub fn all_strongly_convex(&self) -> bool {
        self.potentials.iter().all(EdgePotential::is_strongly_convex)
    }

    /// Largest per-edge gradient Lipschitz constant, if every edge has one.
    pub fn gradient_lipschitz(&self) -> Option<T> {
        self.potentials
            .iter()
            .try_fold(T::zero(), |m, p| Some(m.max(p.gradient_lipschitz()?)))
    }
}
