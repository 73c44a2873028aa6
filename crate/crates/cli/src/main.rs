use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use elastodg_cli::{check, misfit, parse_band, run, verify, Failure, EXIT_CONFIG};

/// High-order ADER-DG elastic wave solver.
#[derive(Parser)]
#[command(name = "elastodg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its outputs.
    Run { config: PathBuf },
    /// Validate a configuration and report mesh statistics and time step.
    Check { config: PathBuf },
    /// Run the built-in property checks.
    Verify {
        /// Include the plane-wave convergence study.
        #[arg(long)]
        full: bool,
    },
    /// Envelope and phase misfit of a seismogram against a reference.
    Misfit {
        signal: PathBuf,
        reference: PathBuf,
        /// Frequency band `lo,hi` in Hz.
        #[arg(long, value_parser = parse_band)]
        band: (f64, f64),
        /// Compare only this column.
        #[arg(long)]
        component: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let result: Result<String, Failure> = match &cli.command {
        Command::Run { config } => run(config),
        Command::Check { config } => check(config),
        Command::Verify { full } => verify(*full),
        Command::Misfit {
            signal,
            reference,
            band,
            component,
        } => misfit(signal, reference, *band, component.as_deref()),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.message.trim_end());
            ExitCode::from(f.code as u8)
        }
    }
}
