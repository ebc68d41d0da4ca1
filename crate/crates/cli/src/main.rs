//! `allee`: runs the model computations from a preset or config file and
//! writes CSV/JSON files for plotting elsewhere.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(
    name = "allee",
    version,
    about = "Stochastic logistic model with mate limitation and immigration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat TOML file with model parameters and run options.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in parameter set: fig1a, fig1b, fig2a or fig2b.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated capacities, e.g. 500,1000,2000.
    #[arg(long, global = true, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,

    #[arg(long, global = true)]
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Stationary distribution (psd.csv) and mode summary (modes.json).
    Psd,
    /// Threshold integral (threshold.json) and tail masses over N (diagnostic.csv).
    Threshold,
    /// Master-equation snapshots from a point mass (evolve.csv, evolve.json).
    Evolve,
    /// Gillespie path (trajectory.csv) and ensemble occupation (occupation.csv, ensemble.json).
    Simulate,
    /// Deterministic trajectory (ode.csv), basins (basins.csv) and equilibria (equilibria.json).
    Ode,
    /// Modes, exponents and tails over N (sweep.csv).
    Sweep,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        (None, Some(name)) => ExperimentConfig::from_preset(name)?,
        _ => {
            return Err(CliError::Validation(
                "exactly one of --config or --preset is required".into(),
            ))
        }
    };
    if let Some(seed) = cli.seed {
        cfg.options.seed = seed;
    }
    if let Some(list) = &cli.n_list {
        cfg.options.n_list = list.clone();
    }
    if let Some(eps) = cli.epsilon {
        cfg.options.epsilon = eps;
    }
    cfg.resolve()
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = load(cli)?;
    let mut out = OutputDir::create(&cli.out)?;
    match cli.command {
        Command::Psd => commands::psd(&cfg, &mut out)?,
        Command::Threshold => commands::threshold(&cfg, &mut out)?,
        Command::Evolve => commands::evolve(&cfg, &mut out)?,
        Command::Simulate => commands::simulate_cmd(&cfg, &mut out)?,
        Command::Ode => commands::ode(&cfg, &mut out)?,
        Command::Sweep => commands::sweep(&cfg, &mut out)?,
    }
    out.write("effective_config.toml", &cfg.to_toml())?;
    Ok(out.written().to_vec())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
