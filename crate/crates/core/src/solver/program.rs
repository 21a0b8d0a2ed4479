use std::fmt;

use crate::cochain::Cochain0;
use crate::error::{Error, Result};
use crate::potentials::PotentialAssignment;
use crate::scalar::Real;
use crate::sheaf::CellularSheaf;
use crate::solver::objective::NodeObjective;

/// `minimize Σ_i f_i(x_i)  subject to  L^{∇U} x = 0`.
pub struct HomologicalProgram<T: Real> {
    sheaf: CellularSheaf<T>,
    potentials: PotentialAssignment<T>,
    objectives: Vec<Box<dyn NodeObjective<T>>>,
}

impl<T: Real> fmt::Debug for HomologicalProgram<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HomologicalProgram")
            .field("node_dims", &self.sheaf.node_dims())
            .field("edges", &self.sheaf.graph().edges())
            .field("objectives", &self.objectives)
            .finish_non_exhaustive()
    }
}

impl<T: Real> HomologicalProgram<T> {
    pub fn new(
        sheaf: CellularSheaf<T>,
        potentials: PotentialAssignment<T>,
        objectives: Vec<Box<dyn NodeObjective<T>>>,
    ) -> Result<Self> {
        if potentials.edge_dims() != sheaf.edge_dims() {
            return Err(Error::InvalidProgram(
                "potential dimensions do not match edge stalks".into(),
            ));
        }
        if objectives.len() != sheaf.graph().node_count() {
            return Err(Error::InvalidProgram(format!(
                "{} objectives for {} nodes",
                objectives.len(),
                sheaf.graph().node_count()
            )));
        }
        for (i, (f, &d)) in objectives.iter().zip(sheaf.node_dims()).enumerate() {
            if f.dim() != d {
                return Err(Error::InvalidProgram(format!(
                    "node {i}: objective dimension {} but stalk dimension {d}",
                    f.dim()
                )));
            }
        }
        Ok(Self { sheaf, potentials, objectives })
    }

    pub fn sheaf(&self) -> &CellularSheaf<T> {
        &self.sheaf
    }

    pub fn potentials(&self) -> &PotentialAssignment<T> {
        &self.potentials
    }

    pub fn objectives(&self) -> &[Box<dyn NodeObjective<T>>] {
        &self.objectives
    }

    /// `Σ_i f_i(x_i)`.
    pub fn objective_value(&self, x: &Cochain0<T>) -> Result<T> {
        x.check_layout(self.sheaf.node_dims())?;
        Ok(self
            .objectives
            .iter()
            .zip(x.blocks())
            .fold(T::zero(), |acc, (f, b)| acc + f.evaluate(b)))
    }

    pub fn check_convexity(&self) -> ConvexityReport {
        let pots = self.potentials.potentials();
        let nonconvex_edges = (0..pots.len()).filter(|&e| !pots[e].is_convex()).collect();
        let nondifferentiable_edges = (0..pots.len())
            .filter(|&e| !pots[e].is_differentiable())
            .collect();
        let non_strongly_convex_edges = (0..pots.len())
            .filter(|&e| !pots[e].is_strongly_convex())
            .collect();
        let nonconvex_nodes = (0..self.objectives.len())
            .filter(|&i| !self.objectives[i].is_convex())
            .collect();
        let improper_nodes = (0..self.objectives.len())
            .filter(|&i| !self.objectives[i].is_closed_proper())
            .collect();
        ConvexityReport {
            nonconvex_edges,
            nondifferentiable_edges,
            non_strongly_convex_edges,
            nonconvex_nodes,
            improper_nodes,
        }
    }
}

/// Which z-update the ADMM solver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZUpdateMode {
    /// Pick from the convexity diagnostic.
    Auto,
    /// Projection onto `ker L` by sheaf diffusion.
    Projection,
    /// `argmin_z U(δz) + (ρ/2)‖v − z‖²` by gradient descent.
    Relaxed,
}

/// Outcome of [`HomologicalProgram::check_convexity`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvexityReport {
    pub nonconvex_edges: Vec<usize>,
    pub nondifferentiable_edges: Vec<usize>,
    /// Edges whose potential lacks a unique minimizer (strong convexity fails).
    pub non_strongly_convex_edges: Vec<usize>,
    pub nonconvex_nodes: Vec<usize>,
    pub improper_nodes: Vec<usize>,
}

impl ConvexityReport {
    /// Every potential differentiable and convex, every objective convex.
    pub fn is_convex_program(&self) -> bool {
        self.nonconvex_edges.is_empty()
            && self.nondifferentiable_edges.is_empty()
            && self.nonconvex_nodes.is_empty()
    }

    /// Convex, closed proper objectives and strongly convex potentials: the diffusion
    /// z-update computes an exact projection.
    pub fn projection_ready(&self) -> bool {
        self.is_convex_program()
            && self.improper_nodes.is_empty()
            && self.non_strongly_convex_edges.is_empty()
    }

    pub fn recommended_mode(&self) -> ZUpdateMode {
        if self.projection_ready() {
            ZUpdateMode::Projection
        } else {
            ZUpdateMode::Relaxed
        }
    }
}

impl fmt::Display for ConvexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_convex_program() {
            write!(f, "convex program")?;
        } else {
            write!(f, "not convex")?;
            if !self.nonconvex_edges.is_empty() {
                write!(f, "; nonconvex potentials on edges {:?}", self.nonconvex_edges)?;
            }
            if !self.nondifferentiable_edges.is_empty() {
                write!(f, "; nondifferentiable potentials on edges {:?}", self.nondifferentiable_edges)?;
            }
            if !self.nonconvex_nodes.is_empty() {
                write!(f, "; nonconvex objectives on nodes {:?}", self.nonconvex_nodes)?;
            }
        }
        match self.recommended_mode() {
            ZUpdateMode::Relaxed => write!(f, "; relaxed z-update recommended"),
            _ => write!(f, "; projection z-update applies"),
        }
    }
}
