//! Named linear maps from a double-integrator state `(p, v) ∈ ℝᵈ⊕ℝᵈ` onto the components
//! an edge coordinates.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{ControlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selector {
    /// `(p, v)`.
    FullState,
    Position,
    Velocity,
    /// First position coordinate.
    XPosition,
    /// `(p_x, p_y, 0)` for a planar agent, for comparison with agents in ℝ³.
    PlanarLift,
}

impl Selector {
    pub const ALL: [Selector; 5] = [
        Selector::FullState,
        Selector::Position,
        Selector::Velocity,
        Selector::XPosition,
        Selector::PlanarLift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Selector::FullState => "full_state",
            Selector::Position => "position",
            Selector::Velocity => "velocity",
            Selector::XPosition => "x_position",
            Selector::PlanarLift => "planar_lift",
        }
    }

    /// Number of rows for an agent in `d` spatial dimensions.
    pub fn output_dim(self, d: usize) -> usize {
        match self {
            Selector::FullState => 2 * d,
            Selector::Position | Selector::Velocity => d,
            Selector::XPosition => 1,
            Selector::PlanarLift => 3,
        }
    }

    pub fn matrix(self, d: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.output_dim(d), 2 * d);
        match self {
            Selector::FullState => m.fill_with_identity(),
            Selector::Position => m.view_mut((0, 0), (d, d)).fill_with_identity(),
            Selector::Velocity => m.view_mut((0, d), (d, d)).fill_with_identity(),
            Selector::XPosition => m[(0, 0)] = 1.0,
            Selector::PlanarLift => {
                if d != 2 {
                    return Err(ControlError::Scenario(format!(
                        "planar_lift needs a planar agent, got d = {d}"
                    )));
                }
                m[(0, 0)] = 1.0;
                m[(1, 1)] = 1.0;
            }
        }
        Ok(m)
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Selector {
    type Err = ControlError;

    fn from_str(s: &str) -> Result<Self> {
        Selector::ALL
            .into_iter()
            .find(|sel| sel.name() == s)
            .ok_or_else(|| ControlError::Scenario(format!("unknown selector `{s}`")))
    }
}
