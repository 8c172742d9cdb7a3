use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use selmod::io::{cmd_fit, cmd_profile, cmd_simulate, parse_alphas};
use selmod::Error;

#[derive(Parser)]
#[command(name = "selmod", version, about = "Sample-selection models with exponential-family responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write a JSON report.
    Fit {
        data: PathBuf,
        spec: PathBuf,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Profile-curve CSV; defaults to `<out>.profile.csv`.
        #[arg(long)]
        profile_out: Option<PathBuf>,
        /// Ignore responses on non-selected rows instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Generate a dataset from a simulation config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the relative profile log-likelihood.
    Profile {
        data: PathBuf,
        spec: PathBuf,
        /// `auto` or a comma-separated list of α values.
        #[arg(long, default_value = "auto", allow_hyphen_values = true)]
        alphas: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema { .. } | Error::Support(_) | Error::Config(_) | Error::InvalidModel(_) | Error::Csv(_) => 2,
        Error::NonConvergence { .. } => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> selmod::Result<()> {
    match cli.command {
        Command::Fit { data, spec, out, profile_out, lenient } => {
            let report = cmd_fit(&data, &spec, out.as_deref(), profile_out.as_deref(), lenient)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if out.is_none() {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
        }
        Command::Simulate { config, out } => {
            let sim = cmd_simulate(&config, &out)?;
            eprintln!("wrote {} rows ({} selected)", sim.data.n(), sim.data.n_selected());
        }
        Command::Profile { data, spec, alphas, out } => {
            let grid = parse_alphas(&alphas)?;
            cmd_profile(&data, &spec, &grid, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
