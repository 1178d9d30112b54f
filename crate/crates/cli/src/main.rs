use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{BenchArgs, DecomposeArgs, ReconstructArgs, VerifyArgs};

/// Two-channel graph filter-banks: verification, point-cloud
/// decomposition and benchmarks.
#[derive(Debug, Parser)]
#[command(name = "mqfb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check folding, spectrum, PR and energy invariants on random graphs.
    Verify(VerifyArgs),
    /// Decompose point-cloud attributes into a tree directory.
    Decompose(DecomposeArgs),
    /// Rebuild attributes from a tree directory.
    Reconstruct(ReconstructArgs),
    /// Time the proposed and bipartite pipelines.
    Bench(BenchArgs),
}

pub enum Failure {
    Usage(String),
    Validation(String),
    Library(mqfb::Error),
}

impl From<mqfb::Error> for Failure {
    fn from(e: mqfb::Error) -> Self {
        Failure::Library(e)
    }
}

const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_NUMERICAL: u8 = 5;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => commands::verify(a),
        Command::Decompose(a) => commands::decompose_cmd(a),
        Command::Reconstruct(a) => commands::reconstruct_cmd(a),
        Command::Bench(a) => commands::bench_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Library(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() {
                EXIT_IO
            } else if e.is_numerical() {
                EXIT_NUMERICAL
            } else if matches!(e.root(), mqfb::Error::WrongInnerProduct) {
                EXIT_VALIDATION
            } else {
                EXIT_USAGE
            })
        }
    }
}
