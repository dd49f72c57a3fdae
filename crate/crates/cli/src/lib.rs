//! Command-line front end: `evaluate`, `predict`, `tune`, `bench` and `gen`.
//!
//! Each subcommand is a plain function over its parsed arguments and an
//! output sink so it can be driven from tests as well as from `main`.

pub mod commands;
pub mod params_file;
pub mod predictions;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Ingest { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    Params { path: PathBuf, message: String },
    #[error("{}: no valid records", .0.display())]
    EmptyDataset(PathBuf),
    #[error("no routes available")]
    NoRoutes,
    #[error("{0}")]
    Model(String),
    #[error("correctness check failed: {0}")]
    Bench(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for empty datasets, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::EmptyDataset(_) | CliError::NoRoutes => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "berthcast",
    version,
    about = "Predict vessel destination ports and arrival times from AIS tracks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train on one labeled file, replay another and print per-route scores.
    Evaluate(commands::EvaluateArgs),
    /// Predict destination and arrival for every point of a query file.
    Predict(commands::PredictArgs),
    /// Tune magnitudes and penalties with a genetic algorithm.
    Tune(commands::TuneArgs),
    /// Compare nearest-neighbor structures on the training points.
    Bench(commands::BenchArgs),
    /// Write a seeded synthetic labeled dataset.
    Gen(commands::GenArgs),
}

pub fn run(
    cli: &Cli,
    out: &mut dyn std::io::Write,
    warn: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    match &cli.command {
        Command::Evaluate(a) => commands::evaluate(a, out, warn).map(drop),
        Command::Predict(a) => commands::predict(a, out, warn).map(drop),
        Command::Tune(a) => commands::tune(a, out, warn).map(drop),
        Command::Bench(a) => commands::bench(a, out, warn).map(drop),
        Command::Gen(a) => commands::gen(a, out).map(drop),
    }
}
