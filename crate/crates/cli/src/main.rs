//! `semiexp`: rate curves, regime classification, rare-event estimates and
//! verification suites from the command line.

mod args;
mod estimate;
mod output;
mod phase;
mod rate;
mod verify;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Failure modes mapped onto the exit codes 1 and 2.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or parameters.
    Usage(String),
    /// A verification check failed.
    Check(String),
}

impl From<semiexp::Error> for CliError {
    fn from(e: semiexp::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("semiexp: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    let run = match cli.command {
        Command::Rate(a) => rate::run(&a),
        Command::Phase(a) => phase::run(&a),
        Command::Estimate(a) => estimate::run(&a),
        Command::Verify(a) => verify::run(&a),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("semiexp: {}", one_line(&msg));
            ExitCode::from(2)
        }
        Err(CliError::Check(msg)) => {
            eprintln!("semiexp: verification failed: {}", one_line(&msg));
            ExitCode::from(1)
        }
    }
}
