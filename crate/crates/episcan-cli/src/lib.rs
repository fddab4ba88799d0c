//! Command-line surface for the detection pipeline: CSV ingestion, config
//! handling, and the `analyze` / `simulate` / `benchmark` subcommands.
//!
//! The binary is a thin wrapper over [`run`]; everything else lives in
//! library modules so the behavior is unit-testable.

pub mod cli;
pub mod commands;
pub mod config;
pub mod ingest;
pub mod output;
pub mod reference;

use anyhow::{bail, Context, Result};

/// Apply `EPISCAN_THREADS` (a positive integer) as a global cap on worker
/// parallelism. Unset means rayon's default (one worker per core).
pub fn init_threads() -> Result<()> {
    let value = match std::env::var("EPISCAN_THREADS") {
        Ok(v) => v,
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(e).context("EPISCAN_THREADS is not valid UTF-8"),
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("EPISCAN_THREADS must be a positive integer, got `{value}`"))?;
    if n == 0 {
        bail!("EPISCAN_THREADS must be a positive integer, got `0`");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the worker thread pool")?;
    Ok(())
}

/// Dispatch a parsed command line.
pub fn run(cli: cli::Cli) -> Result<()> {
    match cli.command {
        cli::Command::Analyze(args) => commands::cmd_analyze(&args),
        cli::Command::Simulate(args) => commands::cmd_simulate(&args),
        cli::Command::Benchmark(args) => commands::cmd_benchmark(&args),
    }
}
