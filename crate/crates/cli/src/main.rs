use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pomp_cli::commands::{self, FilterArgs, FitArgs, ForecastArgs, SimulateArgs};
use pomp_cli::{verify, CliError, Result};

/// Partially observed Markov process models: simulate, filter, fit and
/// forecast from CSV data.
#[derive(Parser)]
#[command(name = "pomp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward-simulate observations, or event times for LGCP models.
    Simulate(SimulateArgs),
    /// Run the particle filter over a stream, one summary row per observation.
    Filter(FilterArgs),
    /// Estimate parameters by particle marginal Metropolis-Hastings.
    Fit(FitArgs),
    /// Predictive means and 99% bands.
    Forecast(ForecastArgs),
    /// Reference runs against closed-form answers.
    Verify {
        /// kalman, conjugate, thinning, lgcp-weight or all
        #[arg(default_value = "all")]
        check: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Filter(a) => commands::filter(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Forecast(a) => commands::forecast(&a),
        Command::Verify { check, seed } => {
            let lines = verify::report(&check, seed).map_err(CliError::from_run)?;
            for l in &lines {
                println!("{l}");
            }
            match lines.iter().filter(|l| !l.pass).count() {
                0 => Ok(()),
                n => Err(CliError::Verify(format!("{n} check(s) failed"))),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream reader went away, e.g. `| head`
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pomp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
