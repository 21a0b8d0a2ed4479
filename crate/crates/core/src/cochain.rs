//! Block vectors over node stalks (0-cochains) and edge stalks (1-cochains).

use std::fmt;
use std::marker::PhantomData;
use std::ops::{Add, Sub};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::{norm_inf, Real};

/// Marker for cochains living on nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nodes {}

/// Marker for cochains living on edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edges {}

/// A cochain stored as one dense block per cell.
pub struct Cochain<T: Real, D> {
    blocks: Vec<DVector<T>>,
    _degree: PhantomData<D>,
}

pub type Cochain0<T> = Cochain<T, Nodes>;
pub type Cochain1<T> = Cochain<T, Edges>;

impl<T: Real, D> Clone for Cochain<T, D> {
    fn clone(&self) -> Self {
        Self::from_blocks(self.blocks.clone())
    }
}

impl<T: Real, D> PartialEq for Cochain<T, D> {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks
    }
}

impl<T: Real, D> fmt::Debug for Cochain<T, D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.blocks.iter().map(|b| b.as_slice()))
            .finish()
    }
}

impl<T: Real, D> Cochain<T, D> {
    pub fn from_blocks(blocks: Vec<DVector<T>>) -> Self {
        Self {
            blocks,
            _degree: PhantomData,
        }
    }

    /// Convenience constructor from nested slices.
    pub fn from_slices<S: AsRef<[T]>>(blocks: &[S]) -> Self {
        Self::from_blocks(
            blocks
                .iter()
                .map(|b| DVector::from_column_slice(b.as_ref()))
                .collect(),
        )
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::from_blocks(dims.iter().map(|&d| DVector::zeros(d)).collect())
    }

    /// Splits a flat vector into blocks of the given sizes.
    pub fn from_flat(dims: &[usize], flat: &DVector<T>) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if flat.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: flat.len(),
            });
        }
        let mut offset = 0;
        let blocks = dims
            .iter()
            .map(|&d| {
                let b = flat.rows(offset, d).into_owned();
                offset += d;
                b
            })
            .collect();
        Ok(Self::from_blocks(blocks))
    }

    pub fn flatten(&self) -> DVector<T> {
        let total = self.total_dim();
        let mut out = DVector::zeros(total);
        let mut offset = 0;
        for b in &self.blocks {
            out.rows_mut(offset, b.len()).copy_from(b);
            offset += b.len();
        }
        out
    }

    pub fn blocks(&self) -> &[DVector<T>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [DVector<T>] {
        &mut self.blocks
    }

    pub fn into_blocks(self) -> Vec<DVector<T>> {
        self.blocks
    }

    pub fn block(&self, i: usize) -> &DVector<T> {
        &self.blocks[i]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    /// Fails unless the block sizes equal `dims`.
    pub fn check_layout(&self, dims: &[usize]) -> Result<()> {
        let ok = self.blocks.len() == dims.len()
            && self.blocks.iter().zip(dims).all(|(b, &d)| b.len() == d);
        if ok {
            Ok(())
        } else {
            Err(Error::LayoutMismatch {
                expected: dims.to_vec(),
                found: self.dims(),
            })
        }
    }

    /// Sum of blockwise dot products.
    pub fn dot(&self, other: &Self) -> T {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .fold(T::zero(), |acc, (a, b)| acc + a.dot(b))
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc.max(norm_inf(b)))
    }

    /// Largest Euclidean norm over blocks.
    pub fn max_block_norm(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc.max(b.norm()))
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.axpy(alpha, b, T::one());
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self::from_blocks(self.blocks.iter().map(|b| b * alpha).collect())
    }

    pub fn map_blocks(&self, mut f: impl FnMut(usize, &DVector<T>) -> DVector<T>) -> Self {
        Self::from_blocks(
            self.blocks
                .iter()
                .enumerate()
                .map(|(i, b)| f(i, b))
                .collect(),
        )
    }
}

impl<T: Real, D> Add for &Cochain<T, D> {
    type Output = Cochain<T, D>;
    fn add(self, rhs: Self) -> Cochain<T, D> {
        Cochain::from_blocks(
            self.blocks
                .iter()
                .zip(&rhs.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl<T: Real, D> Sub for &Cochain<T, D> {
    type Output = Cochain<T, D>;
    fn sub(self, rhs: Self) -> Cochain<T, D> {
        Cochain::from_blocks(
            self.blocks
                .iter()
                .zip(&rhs.blocks)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}
