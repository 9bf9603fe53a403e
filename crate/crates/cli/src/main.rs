//! `nic`: generate data, identify a polynomial model, validate the
//! closed-loop stability condition and simulate the inversion controller.
//!
//! Exit codes: 0 success, 1 domain failure (identification or validation
//! verdict, divergence), 2 usage or parse error. Verbosity is set with
//! `NIC_LOG` (`error`, `warn`, `info`, `debug`, `trace`).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};

use commands::{Classify, CliResult, Context};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "nic",
    version,
    about = "Polynomial model identification and inversion control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the configured plant under excitation and write `data.csv`.
    GenerateData,
    /// Identify a model from the data CSV; writes `model.toml` and
    /// `identify_report.toml`.
    Identify,
    /// Check the closed-loop stability condition over the mu grid; writes
    /// `validation.toml`.
    Validate,
    /// Run every configured scenario; writes one trajectory CSV per scenario
    /// and `metrics.toml`.
    Simulate,
}

fn run(cli: Cli) -> CliResult {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).usage()?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))
        .usage()?;
    let ctx = Context {
        seed: cli.seed.unwrap_or(config.seed),
        config,
        out: cli.out,
    };
    match cli.command {
        Command::GenerateData => commands::generate_data_cmd(&ctx),
        Command::Identify => commands::identify_cmd(&ctx),
        Command::Validate => commands::validate_cmd(&ctx),
        Command::Simulate => commands::simulate_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NIC_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error());
            ExitCode::from(e.exit_code())
        }
    }
}
