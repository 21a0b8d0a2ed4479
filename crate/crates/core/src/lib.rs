//! Nonlinear homological programming on cellular sheaves.
//!
//! The crate provides cellular sheaves over graphs ([`CellularSheaf`]), edge potentials
//! ([`EdgePotential`]), the nonlinear sheaf Laplacian and its diffusion
//! ([`LaplacianContext`]), and an ADMM solver for programs of the form
//! `minimize Σ f_i(x_i) subject to L^{∇U} x = 0` ([`solver::admm_solve`]).
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar for the common cases.

pub mod cochain;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod potentials;
pub mod scalar;
pub mod sheaf;
pub mod solver;

pub use cochain::{Cochain, Cochain0, Cochain1, Edges, Nodes};
pub use dynamics::{DiffusionParams, DiffusionResult, DiffusionScheme, LaplacianContext};
pub use error::{Error, Result};
pub use graph::{Graph, Incidence};
pub use potentials::{EdgePotential, PotentialAssignment, PotentialBlock};
pub use scalar::Real;
pub use sheaf::{CellularSheaf, EdgeRestrictions, Preimage};

pub type Sheaf = CellularSheaf<f64>;
pub type Sheaf32 = CellularSheaf<f32>;
pub type NodeCochain = Cochain0<f64>;
pub type NodeCochain32 = Cochain0<f32>;
pub type EdgeCochain = Cochain1<f64>;
pub type EdgeCochain32 = Cochain1<f32>;
pub type Potential = EdgePotential<f64>;
pub type Potential32 = EdgePotential<f32>;
pub type Potentials = PotentialAssignment<f64>;
pub type Program = solver::HomologicalProgram<f64>;
pub type Program32 = solver::HomologicalProgram<f32>;
pub type Admm = solver::AdmmParams<f64>;
