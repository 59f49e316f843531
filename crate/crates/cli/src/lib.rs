//! Command-line driver: corpora in, report bundles out.

pub mod commands;
pub mod config;
pub mod output;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::Value;

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "dissent",
    version,
    about = "Agreement and divisiveness analysis of pairwise preference data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Parse and validate a corpus, write it in canonical CSV form
    Ingest,
    /// Flag suspicious participants and deduplicate pairwise records
    Curate,
    /// Score, rank and measure divisiveness
    Analyze,
    /// Pairwise efficiency, IIA robustness, convergence and SVD factors
    Audit,
    /// Generate a synthetic electorate from a spec file
    Synth,
}

pub fn run(command: Command, config: &RunConfig) -> Result<Value> {
    match command {
        Command::Ingest => commands::cmd_ingest(config),
        Command::Curate => commands::cmd_curate(config),
        Command::Analyze => commands::cmd_analyze(config),
        Command::Audit => commands::cmd_audit(config),
        Command::Synth => commands::cmd_synth(config),
    }
}

pub fn run_cli(cli: &Cli) -> Result<Value> {
    let config = RunConfig::resolve(&cli.overrides)?;
    run(cli.command, &config)
}
