//! Scenario configuration, experiment execution and plotting for the `homprog` command.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;

pub use config::{load_config, parse_config, to_toml_string, ResolvedConfig, ScenarioConfig};
pub use error::{CliError, Result};
pub use experiment::{resolve_out_dir, run_experiment, RunOptions, RunOutcome, RunSummary, OUT_DIR_ENV};
pub use plot::emit_plot;
