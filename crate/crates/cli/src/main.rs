//! `dimo` command-line front end. JSON goes to stdout, tables and
//! diagnostics to stderr.

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Backend(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("{0}")]
    NoSamples(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("interrupted; partial records flushed")]
    Interrupted,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Backend(_) => 3,
            Self::Image(_) => 4,
            Self::NoSamples(_) => 5,
            Self::Generation(_) => 6,
            Self::Interrupted => 130,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Ground(a) => commands::ground(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Synth(a) => commands::synth(a),
        Command::Config(a) => commands::config(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
