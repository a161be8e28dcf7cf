//! `hfttc`: train and evaluate the hypergraph-transformer predictor and run
//! HF-TTC risk analysis from the command line.
//!
//! Exit codes: 0 success, 2 configuration or scenario error, 3 data or I/O
//! error, 4 numerical divergence, 1 anything else.

mod commands;
mod config;
mod data;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hfttc_core::{Error, Result};

use config::{RunConfig, Settings};

#[derive(Parser)]
#[command(name = "hfttc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the training split; writes a checkpoint and loss.csv.
    Train(Common),
    /// Score a checkpoint per host behavior against the constant-velocity baseline.
    Evaluate(Common),
    /// HF-TTC / HF-ITTC distributions for every host/ambient pair.
    Safety(Common),
    /// Simulate a scenario spec and run the risk analysis on its snapshots.
    Scenario {
        /// Scenario spec (JSON).
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic corpus of interacting traffic recordings.
    Corpus(Common),
}

fn resolve(common: Common) -> Result<RunConfig> {
    let settings = match &common.config {
        Some(path) => common.settings.over(Settings::from_file(path)?),
        None => common.settings,
    };
    RunConfig::resolve(settings)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => commands::cmd_train(&resolve(c)?),
        Command::Evaluate(c) => commands::cmd_evaluate(&resolve(c)?),
        Command::Safety(c) => commands::cmd_safety(&resolve(c)?),
        Command::Scenario { spec, common } => commands::cmd_scenario(&resolve(common)?, &spec),
        Command::Corpus(c) => commands::cmd_corpus(&resolve(c)?),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Spec(_) => 2,
        Error::Data { .. } | Error::Io { .. } => 3,
        Error::Divergence(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
