//! `orthnewton`: separate, bench, inspect and mix.

mod args;
mod bench;
mod inspect;
mod manifest;
mod mix;
mod separate;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Why a command stopped early.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid input, or an output that could not be written.
    Input(String),
    /// The optimizer ended with `lambda_overflow` or `solver_failure`.
    Optimizer(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Optimizer(_) => 3,
        }
    }
}

impl From<orthnewton::Error> for Failure {
    fn from(e: orthnewton::Error) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Separate(a) => separate::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Inspect(a) => inspect::run(a),
        Command::Mix(a) => mix::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(msg) => eprintln!("error: {msg}"),
                Failure::Optimizer(msg) => eprintln!("optimizer failed: {msg}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
