//! Test support: random instances and dense reference computations.
//!
//! The oracles here only read sheaf data through its public accessors and recompute
//! everything from the definitions with dense linear algebra, independently of the
//! matrix-free routines they are used to check.

use homprog_core::{CellularSheaf, Graph};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut TestRng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn random_matrix(rng: &mut TestRng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// Symmetric positive definite matrix with eigenvalues at least `min_eig`.
pub fn random_spd(rng: &mut TestRng, n: usize, min_eig: f64) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n, 1.0);
    &m * m.transpose() + DMatrix::identity(n, n) * min_eig
}

/// Random graph on `2..=max_nodes` nodes with at least one edge.
pub fn random_graph(rng: &mut TestRng, max_nodes: usize) -> Graph {
    let n = rng.random_range(2..=max_nodes.max(2));
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.5) {
                    edges.push((i, j));
                }
            }
        }
        if !edges.is_empty() {
            return Graph::new(n, edges).unwrap();
        }
    }
}

pub fn random_connected_graph(rng: &mut TestRng, max_nodes: usize) -> Graph {
    loop {
        let g = random_graph(rng, max_nodes);
        if g.component_count() == 1 {
            return g;
        }
    }
}

/// Sheaf with random stalk dimensions in `1..=max_dim` and random dense restriction maps.
pub fn random_sheaf(rng: &mut TestRng, max_nodes: usize, max_dim: usize) -> CellularSheaf<f64> {
    let graph = random_graph(rng, max_nodes);
    let node_dims: Vec<usize> = (0..graph.node_count())
        .map(|_| rng.random_range(1..=max_dim))
        .collect();
    let restrictions = graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            let d = rng.random_range(1..=max_dim);
            (
                random_matrix(rng, d, node_dims[i], 1.0),
                random_matrix(rng, d, node_dims[j], 1.0),
            )
        })
        .collect();
    CellularSheaf::new(graph, node_dims, restrictions).unwrap()
}

/// Signed incidence matrix (`+1` at the lower endpoint, `−1` at the upper).
pub fn incidence(graph: &Graph) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(graph.edge_count(), graph.node_count());
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        m[(e, i)] = 1.0;
        m[(e, j)] = -1.0;
    }
    m
}

/// Unnormalized graph Laplacian `D − A`, built from degrees and adjacency.
pub fn graph_laplacian(graph: &Graph) -> DMatrix<f64> {
    let n = graph.node_count();
    let mut l = DMatrix::zeros(n, n);
    for &(i, j) in graph.edges() {
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
    }
    l
}

pub fn kron_identity(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    m.kronecker(&DMatrix::identity(k, k))
}

/// Dense coboundary built directly from the restriction maps.
pub fn dense_coboundary(sheaf: &CellularSheaf<f64>) -> DMatrix<f64> {
    let node_off = prefix(sheaf.node_dims());
    let edge_off = prefix(sheaf.edge_dims());
    let mut d = DMatrix::zeros(sheaf.edge_total_dim(), sheaf.node_total_dim());
    for (e, &(i, j)) in sheaf.graph().edges().iter().enumerate() {
        let (a, b) = sheaf.restrictions(e);
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                d[(edge_off[e] + r, node_off[i] + c)] += a[(r, c)];
            }
            for c in 0..b.ncols() {
                d[(edge_off[e] + r, node_off[j] + c)] -= b[(r, c)];
            }
        }
    }
    d
}

fn prefix(dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect()
}

/// Orthonormal basis of `ker m` (columns), from the eigenvectors of `mᵀm`.
pub fn kernel_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| eig.eigenvalues[k].abs() <= rel_tol * top)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > rel_tol * top.max(1.0)).count()
}

pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let cutoff = 1e-10 * svd.singular_values.max().max(1.0);
    svd.pseudo_inverse(cutoff).unwrap()
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, y: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(y.len(), |k, _| {
        let mut p = y.clone();
        let mut m = y.clone();
        p[k] += h;
        m[k] -= h;
        (f(&p) - f(&m)) / (2.0 * h)
    })
}

/// Solution of `min ½xᵀHx + gᵀx  s.t.  Dx = b` by the null-space method.
#[derive(Debug, Clone)]
pub struct EqualityQp {
    pub x: DVector<f64>,
    pub value: f64,
    /// Multiplier with `Hx + g + Dᵀλ = 0` (minimum-norm choice).
    pub multiplier: DVector<f64>,
}

pub fn equality_qp(h: &DMatrix<f64>, g: &DVector<f64>, d: &DMatrix<f64>, b: &DVector<f64>) -> EqualityQp {
    let x_p = pinv(d) * b;
    let n = kernel_basis(d, 1e-12);
    let x = if n.ncols() == 0 {
        x_p
    } else {
        let reduced_h = n.transpose() * h * &n;
        let rhs = -(n.transpose() * (h * &x_p + g));
        let w = reduced_h.cholesky().expect("reduced Hessian is positive definite").solve(&rhs);
        &x_p + &n * w
    };
    let value = 0.5 * x.dot(&(h * &x)) + g.dot(&x);
    let multiplier = -(pinv(&d.transpose()) * (h * &x + g));
    EqualityQp { x, value, multiplier }
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::zeros(n, n);
    let mut o = 0;
    for b in blocks {
        m.view_mut((o, o), b.shape()).copy_from(b);
        o += b.nrows();
    }
    m
}

/// States `x(1) = c, x(t+1) = A x(t) + B u(t)` for the given controls.
pub fn simulate_lti(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DVector<f64>, controls: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut states = vec![c.clone()];
    for u in controls {
        let next = a * states.last().unwrap() + b * u;
        states.push(next);
    }
    states
}
