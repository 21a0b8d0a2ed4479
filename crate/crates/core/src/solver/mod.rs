//! Homological programs and their ADMM solver.

pub mod admm;
pub mod box_qp;
pub mod objective;
pub mod program;

pub use admm::{
    admm_solve, x_update, y_update, z_update_projection, z_update_relaxed, AdmmIterate, AdmmOutcome,
    AdmmParams, AdmmReport, AdmmStatus, RelaxedResult,
};
pub use box_qp::{solve_box_qp, BoxQpOptions, BoxQpSolution};
pub use objective::{BoxQuadraticObjective, NodeObjective, QuadraticObjective, SmoothObjective, ZeroObjective};
pub use program::{ConvexityReport, HomologicalProgram, ZUpdateMode};
