use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homprog_cli::{emit_plot, load_config, resolve_out_dir, run_experiment, RunOptions, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "homprog", version, about = "Multi-agent MPC on cellular sheaves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory, metrics and solver CSVs plus a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to $HOMPROG_OUT_DIR, then the config's `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Draw agent paths from a trajectory CSV as SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config and print the defaults it relies on.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode, homprog_cli::CliError> {
    match cli.command {
        Command::Run { config, out, seed, steps } => {
            let resolved = load_config(&config)?.resolve()?;
            let env = std::env::var(OUT_DIR_ENV).ok();
            let out_dir = resolve_out_dir(
                out.as_deref(),
                env.as_deref(),
                resolved.output_dir.as_deref(),
                &resolved.scenario.name,
            );
            let outcome = run_experiment(&resolved, &RunOptions { seed, steps }, &out_dir)?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
            if !outcome.summary.succeeded() {
                eprintln!(
                    "run incomplete: {} fallback step(s){}; partial outputs in {}",
                    outcome.summary.fallback_steps,
                    outcome.summary.error.as_deref().map(|e| format!(", error: {e}")).unwrap_or_default(),
                    out_dir.display()
                );
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { input, out } => {
            emit_plot(&input, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let resolved = load_config(&config)?.resolve()?;
            let s = &resolved.scenario;
            println!(
                "ok: `{}` ({}), {} agents, {} edges, horizon {}, {} steps",
                s.name,
                s.kind.name(),
                s.agents.len(),
                s.edges.len(),
                s.mpc.horizon,
                s.mpc.steps
            );
            for d in &resolved.defaults {
                println!("default {} = {}", d.path, d.value);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
