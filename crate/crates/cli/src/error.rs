use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("could not serialize config: {0}")]
    Serialize(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trajectory CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Control(#[from] homprog_control::ControlError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Invalid { path: path.into(), message: message.into() }
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}
