use thiserror::Error;

/// Errors raised by sheaf construction, cochain arithmetic, potentials, diffusion and ADMM.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("stalk dimension must be positive ({0})")]
    ZeroStalkDimension(String),

    #[error("restriction map on edge {edge} from node {node} has shape {found:?}, expected {expected:?}")]
    RestrictionShape {
        edge: usize,
        node: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("cochain layout mismatch: expected block dims {expected:?}, found {found:?}")]
    LayoutMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("edge {edge}: potential of kind {kind} has no unique minimizer")]
    NoMinimizer { edge: usize, kind: &'static str },

    #[error("node {node}: missing state for neighbor {neighbor}")]
    MissingNeighbor { node: usize, neighbor: usize },

    #[error("node {node}: unexpected state for non-neighbor {other}")]
    UnexpectedNeighbor { node: usize, other: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iterative solve did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("node {node}: prox evaluation failed: {reason}")]
    Prox { node: usize, reason: String },

    #[error("ADMM iteration {iteration}: {source}")]
    Admm {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("program is not valid: {0}")]
    InvalidProgram(String),
}

pub type Result<T> = std::result::Result<T, Error>;
