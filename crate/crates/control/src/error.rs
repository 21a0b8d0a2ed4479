use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: String,
        expected: String,
        found: String,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("horizon must be at least 2, got {0}")]
    Horizon(usize),
    #[error("infeasible control bounds at component {index}: {lo} > {hi}")]
    Bounds { index: usize, lo: f64, hi: f64 },
    #[error(transparent)]
    Core(#[from] homprog_core::Error),
}

pub type Result<T> = std::result::Result<T, ControlError>;

pub(crate) fn shape(what: impl Into<String>, expected: impl ToString, found: impl ToString) -> ControlError {
    ControlError::Shape {
        what: what.into(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
