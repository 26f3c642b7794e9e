mod eval;
mod gen_data;
mod provenance;
mod reconstruct;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Radial multi-coil MRI simulation and residual DNN series reconstruction.
#[derive(Debug, Parser)]
#[command(name = "r2d2", version = env!("R2D2_BUILD_VERSION"))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a data set of inverse problems.
    GenData(gen_data::Args),
    /// Train a series of modules on a data set.
    Train(train::Args),
    /// Run a trained series on one or more problems.
    Reconstruct(reconstruct::Args),
    /// Aggregate reconstruction traces into tables and curves.
    Eval(eval::Args),
}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Usage errors for bad flags, numerical ones for arithmetic failures, data errors otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<r2d2_core::Error>() {
            return match e {
                r2d2_core::Error::InvalidArgument(_) => EXIT_USAGE,
                e if e.is_numerical() => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            };
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
    }
    EXIT_DATA
}

/// A flag combination rejected by the CLI itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data::run(a),
        Command::Train(a) => train::run(a),
        Command::Reconstruct(a) => reconstruct::run(a),
        Command::Eval(a) => eval::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
