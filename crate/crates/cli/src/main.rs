use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paracut_core::Error;

mod bench;
mod input;
mod solve;
mod verify;

#[derive(Parser)]
#[command(name = "paracut", version, about = "Parallel min-cut solvers for grid energies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its labeling.
    Solve(solve::SolveArgs),
    /// Compare algorithms, thread counts and weight scales on one instance.
    Bench(bench::BenchArgs),
    /// Cross-check solvers against exact oracles on random instances.
    Verify(verify::VerifyArgs),
}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NOT_CERTIFIED: u8 = 4;

/// Exit code for a library error.
pub fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Csv(_) | Error::Parse { .. } | Error::Format(_) | Error::FingerprintMismatch(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

pub fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code_for(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(args) => solve::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Verify(args) => verify::run(args),
    }
}
