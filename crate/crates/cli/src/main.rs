//! `cohent` — convert multilevel coherence into multipartite entanglement,
//! measure both resources, and verify the conversion identities on seeded
//! random states.
//!
//! Exit codes: 0 success / all assertions pass, 1 assertion failure,
//! 2 input error, 3 solver non-convergence.

mod convert;
mod measure;
mod random;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cohent_core::CoreError;

#[derive(Parser)]
#[command(
    name = "cohent",
    version,
    about = "Multilevel coherence <-> multipartite entanglement conversion toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the conversion protocol on a state file.
    Convert(convert::ConvertArgs),
    /// Compute a resource measure of a state file.
    Measure(measure::MeasureArgs),
    /// Verify a conversion theorem on seeded random states.
    Verify(verify::VerifyArgs),
}

/// Error wrapper mapping every failure onto the documented exit codes.
#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Io(std::io::Error),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{}", e),
            CliError::Io(e) => write!(f, "{}", e),
            CliError::Usage(msg) => write!(f, "{}", msg),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Core(CoreError::SolverNonConvergence { .. }) => ExitCode::from(3),
            _ => ExitCode::from(2),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(args) => convert::run(&args),
        Command::Measure(args) => measure::run(&args),
        Command::Verify(args) => verify::run(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err);
            err.exit_code()
        }
    }
}
