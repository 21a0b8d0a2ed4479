//! Cellular sheaves on graphs and the coboundary operator.
//!
//! For an edge `e = (i, j)` with `i < j` the coboundary is
//! `(δx)_e = F_{i◁e} x_i − F_{j◁e} x_j`. Node stalks may have dimension zero (the
//! initial vertex of a dynamics sheaf carries `ℝ⁰`); edge stalks must be nonzero.

use nalgebra::{DMatrix, DVector};

use crate::cochain::{Cochain0, Cochain1};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Real;

/// Restriction maps of one edge: `(F_{i◁e}, F_{j◁e})` for the canonical `(i, j)`.
pub type EdgeRestrictions<T> = (DMatrix<T>, DMatrix<T>);

#[derive(Debug, Clone, PartialEq)]
pub struct CellularSheaf<T: Real> {
    graph: Graph,
    node_dims: Vec<usize>,
    edge_dims: Vec<usize>,
    restrictions: Vec<EdgeRestrictions<T>>,
}

impl<T: Real> CellularSheaf<T> {
    /// Builds a sheaf from node stalk dimensions and one restriction pair per edge.
    ///
    /// Edge stalk dimensions are read off the row count of the restriction maps; each pair is
    /// given in the canonical `(lower, upper)` endpoint order of `graph.edges()`.
    pub fn new(
        graph: Graph,
        node_dims: Vec<usize>,
        restrictions: Vec<EdgeRestrictions<T>>,
    ) -> Result<Self> {
        if node_dims.len() != graph.node_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.node_count(),
                found: node_dims.len(),
            });
        }
        if restrictions.len() != graph.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.edge_count(),
                found: restrictions.len(),
            });
        }
        let mut edge_dims = Vec::with_capacity(restrictions.len());
        for (e, (lo, hi)) in restrictions.iter().enumerate() {
            let (i, j) = graph.edge(e);
            let rows = lo.nrows();
            if rows == 0 {
                return Err(Error::ZeroStalkDimension(format!("edge {e}")));
            }
            for (node, map) in [(i, lo), (j, hi)] {
                let expected = (rows, node_dims[node]);
                if map.shape() != expected {
                    return Err(Error::RestrictionShape {
                        edge: e,
                        node,
                        expected,
                        found: map.shape(),
                    });
                }
            }
            edge_dims.push(rows);
        }
        Ok(Self {
            graph,
            node_dims,
            edge_dims,
            restrictions,
        })
    }

    /// The constant sheaf `ℝᵏ`: every stalk is `ℝᵏ` and every restriction is the identity.
    pub fn constant(graph: Graph, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroStalkDimension("constant sheaf needs k ≥ 1".into()));
        }
        let restrictions = (0..graph.edge_count())
            .map(|_| (DMatrix::identity(k, k), DMatrix::identity(k, k)))
            .collect();
        let node_dims = vec![k; graph.node_count()];
        Self::new(graph, node_dims, restrictions)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn node_dims(&self) -> &[usize] {
        &self.node_dims
    }

    pub fn edge_dims(&self) -> &[usize] {
        &self.edge_dims
    }

    pub fn node_total_dim(&self) -> usize {
        self.node_dims.iter().sum()
    }

    pub fn edge_total_dim(&self) -> usize {
        self.edge_dims.iter().sum()
    }

    pub fn restrictions(&self, e: usize) -> &EdgeRestrictions<T> {
        &self.restrictions[e]
    }

    /// `F_{node◁e}`; panics if `node` is not an endpoint of `e`.
    pub fn restriction(&self, e: usize, node: usize) -> &DMatrix<T> {
        let (i, j) = self.graph.edge(e);
        if node == i {
            &self.restrictions[e].0
        } else if node == j {
            &self.restrictions[e].1
        } else {
            panic!("node {node} is not an endpoint of edge {e}")
        }
    }

    pub fn zero_cochain0(&self) -> Cochain0<T> {
        Cochain0::zeros(&self.node_dims)
    }

    pub fn zero_cochain1(&self) -> Cochain1<T> {
        Cochain1::zeros(&self.edge_dims)
    }

    /// Value of `(δx)_e` from the two endpoint states.
    pub fn edge_difference(&self, e: usize, x_lo: &DVector<T>, x_hi: &DVector<T>) -> DVector<T> {
        let (lo, hi) = &self.restrictions[e];
        lo * x_lo - hi * x_hi
    }

    pub fn coboundary(&self, x: &Cochain0<T>) -> Result<Cochain1<T>> {
        x.check_layout(&self.node_dims)?;
        let blocks = self
            .graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| self.edge_difference(e, x.block(i), x.block(j)))
            .collect();
        Ok(Cochain1::from_blocks(blocks))
    }

    /// Adjoint of [`coboundary`](Self::coboundary): block `i` sums `±F_{i◁e}ᵀ y_e` over incident edges.
    pub fn coboundary_transpose(&self, y: &Cochain1<T>) -> Result<Cochain0<T>> {
        y.check_layout(&self.edge_dims)?;
        let blocks = (0..self.graph.node_count())
            .map(|i| self.coboundary_transpose_block(i, y))
            .collect();
        Ok(Cochain0::from_blocks(blocks))
    }

    fn coboundary_transpose_block(&self, i: usize, y: &Cochain1<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.node_dims[i]);
        for inc in self.graph.neighbors(i) {
            let e = inc.edge;
            let (lo, hi) = &self.restrictions[e];
            if self.graph.edge(e).0 == i {
                out.gemv_tr(T::one(), lo, y.block(e), T::one());
            } else {
                out.gemv_tr(-T::one(), hi, y.block(e), T::one());
            }
        }
        out
    }

    /// True iff every edge block of `δx` has Euclidean norm at most `tol`.
    pub fn is_global_section(&self, x: &Cochain0<T>, tol: T) -> Result<bool> {
        if tol < T::zero() {
            return Err(Error::InvalidParameter("tolerance must be nonnegative".into()));
        }
        Ok(self.coboundary(x)?.max_block_norm() <= tol)
    }

    /// Dense matrix `D` with `D · flatten(x) = flatten(δx)`.
    pub fn assemble_coboundary_matrix(&self) -> DMatrix<T> {
        let node_off = offsets(&self.node_dims);
        let edge_off = offsets(&self.edge_dims);
        let mut d = DMatrix::zeros(self.edge_total_dim(), self.node_total_dim());
        for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
            let (lo, hi) = &self.restrictions[e];
            let r = edge_off[e];
            d.view_mut((r, node_off[i]), lo.shape()).copy_from(lo);
            d.view_mut((r, node_off[j]), hi.shape()).copy_from(&(-hi));
        }
        d
    }

    /// Minimum-norm least-squares preimage `δ⁺b`, computed matrix-free by CGLS.
    ///
    /// CGLS started from zero keeps its iterates in `image δᵀ = (ker δ)^⊥`, so the limit is
    /// the minimum-norm solution. The normal-equation residual `‖δᵀ(b − δx)‖` is driven below
    /// `tol`; whether `b` lies in the image is reported, not treated as an error.
    pub fn min_norm_preimage(&self, b: &Cochain1<T>, tol: T) -> Result<Preimage<T>> {
        if tol <= T::zero() {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        b.check_layout(&self.edge_dims)?;
        let max_iters = 4 * self.node_total_dim() + 50;
        let target = tol * T::lit(1e-4);

        let mut x = self.zero_cochain0();
        let mut r = b.clone();
        let mut s = self.coboundary_transpose(&r)?;
        let mut p = s.clone();
        let mut gamma = s.dot(&s);
        let mut iterations = 0;
        while gamma.sqrt() > target && iterations < max_iters {
            let q = self.coboundary(&p)?;
            let qq = q.dot(&q);
            if qq <= T::zero() {
                break;
            }
            let step = gamma / qq;
            x.axpy(step, &p);
            r.axpy(-step, &q);
            s = self.coboundary_transpose(&r)?;
            let gamma_next = s.dot(&s);
            let beta = gamma_next / gamma;
            p = &s + &p.scaled(beta);
            gamma = gamma_next;
            iterations += 1;
        }
        // recompute to avoid drift in the recursively updated residual
        let r = b - &self.coboundary(&x)?;
        let normal = self.coboundary_transpose(&r)?.norm();
        if normal > tol {
            return Err(Error::NotConverged {
                iterations,
                residual: normal.as_f64(),
            });
        }
        let residual = r.norm();
        Ok(Preimage {
            x,
            iterations,
            residual,
            normal_residual: normal,
            in_image: residual <= tol,
        })
    }
}

/// Result of [`CellularSheaf::min_norm_preimage`].
#[derive(Debug, Clone)]
pub struct Preimage<T: Real> {
    pub x: Cochain0<T>,
    pub iterations: usize,
    /// `‖δx − b‖`.
    pub residual: T,
    /// `‖δᵀ(δx − b)‖`.
    pub normal_residual: T,
    /// False when `b` is not (numerically) in the image of `δ`; `x` is then the least-squares solution.
    pub in_image: bool,
}

pub(crate) fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    dims.iter()
        .map(|&d| {
            let o = acc;
            acc += d;
            o
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn path2() -> CellularSheaf<f64> {
        CellularSheaf::constant(Graph::path(2).unwrap(), 1).unwrap()
    }

    #[test]
    fn constant_sheaf_shapes() {
        let s = CellularSheaf::<f64>::constant(Graph::complete(3).unwrap(), 2).unwrap();
        assert_eq!(s.node_dims(), &[2, 2, 2]);
        assert_eq!(s.edge_dims(), &[2, 2, 2]);
        for e in 0..3 {
            let (a, b) = s.restrictions(e);
            assert_eq!(a, &DMatrix::identity(2, 2));
            assert_eq!(b, &DMatrix::identity(2, 2));
        }
        assert!(CellularSheaf::<f64>::constant(Graph::path(2).unwrap(), 0).is_err());
    }

    #[test]
    fn coboundary_on_two_node_path() {
        let s = path2();
        let same = Cochain0::from_slices(&[[2.5], [2.5]]);
        assert_eq!(s.coboundary(&same).unwrap().flatten()[0], 0.0);
        let x = Cochain0::from_slices(&[[3.0], [1.0]]);
        assert_eq!(s.coboundary(&x).unwrap().flatten().as_slice(), &[2.0]);
        let y = Cochain1::from_slices(&[[2.0]]);
        assert_eq!(s.coboundary_transpose(&y).unwrap().flatten().as_slice(), &[2.0, -2.0]);
        assert_eq!(s.assemble_coboundary_matrix(), dmatrix![1.0, -1.0]);
    }

    #[test]
    fn coboundary_with_projection_maps() {
        let g = Graph::path(2).unwrap();
        let s = CellularSheaf::new(g, vec![2, 2], vec![(dmatrix![1.0, 0.0], dmatrix![0.0, 1.0])]).unwrap();
        let x = Cochain0::from_slices(&[[1.0, 2.0], [3.0, 1.0]]);
        assert_eq!(s.coboundary(&x).unwrap().flatten().as_slice(), &[0.0]);
    }

    #[test]
    fn rejects_bad_shapes_and_layouts() {
        let g = Graph::path(2).unwrap();
        let bad = CellularSheaf::<f64>::new(g.clone(), vec![2, 2], vec![(dmatrix![1.0, 0.0], dmatrix![1.0])]);
        assert!(matches!(bad, Err(Error::RestrictionShape { node: 1, .. })));
        let s = path2();
        let x = Cochain0::from_slices(&[&[1.0][..], &[1.0, 2.0][..]]);
        assert!(matches!(s.coboundary(&x), Err(Error::LayoutMismatch { .. })));
        assert!(s.coboundary_transpose(&Cochain1::zeros(&[2])).is_err());
    }

    #[test]
    fn global_sections_of_constant_sheaf() {
        let s = CellularSheaf::<f64>::constant(Graph::path(3).unwrap(), 1).unwrap();
        let consensus = Cochain0::from_slices(&[[4.0], [4.0], [4.0]]);
        assert!(s.is_global_section(&consensus, 1e-9).unwrap());
        let x = Cochain0::from_slices(&[[1.0], [2.0], [1.0]]);
        assert!(!s.is_global_section(&x, 1e-9).unwrap());
        assert!(s.is_global_section(&x, -1.0).is_err());
    }

    #[test]
    fn preimage_small_cases() {
        let s = path2();
        let zero = s.min_norm_preimage(&Cochain1::zeros(&[1]), 1e-10).unwrap();
        assert_eq!(zero.x.flatten().as_slice(), &[0.0, 0.0]);
        let p = s.min_norm_preimage(&Cochain1::from_slices(&[[2.0]]), 1e-10).unwrap();
        assert_abs_diff_eq!(p.x.flatten()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.x.flatten()[1], -1.0, epsilon = 1e-12);
        assert!(p.in_image);
    }

    #[test]
    fn preimage_flags_targets_outside_the_image() {
        // triangle: cycle-space is one-dimensional, so a circulating b has no preimage
        let s = CellularSheaf::<f64>::constant(Graph::complete(3).unwrap(), 1).unwrap();
        // edges (0,1), (0,2), (1,2): δx = (x0-x1, x0-x2, x1-x2); (1,-1,1) is orthogonal to the image
        let b = Cochain1::from_slices(&[[1.0], [-1.0], [1.0]]);
        let p = s.min_norm_preimage(&b, 1e-10).unwrap();
        assert!(!p.in_image);
        assert_abs_diff_eq!(p.x.norm(), 0.0, epsilon = 1e-12);
    }
}
