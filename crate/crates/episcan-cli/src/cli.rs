//! Command-line argument definitions.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "episcan",
    version,
    about = "Online epidemic trend detection with false-discovery-rate control",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analyze a case-count CSV and write per-step decisions.
    Analyze(AnalyzeArgs),
    /// Generate one synthetic epidemic and write it as CSV.
    Simulate(SimulateArgs),
    /// Run replicated benchmark scenarios and compare against golden values.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Input CSV: generic `date,new_cases`, or a multi-location file with a
    /// `location` column (requires --location).
    #[arg(long)]
    pub input: PathBuf,

    /// Output directory for decisions.csv and summary.json.
    #[arg(long)]
    pub output: PathBuf,

    /// TOML config file; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Location to keep from a multi-location file.
    #[arg(long)]
    pub location: Option<String>,

    /// Exposure window length, in observation units.
    #[arg(long)]
    pub d: Option<usize>,

    /// Estimation window length, in observation units.
    #[arg(long)]
    pub h: Option<usize>,

    /// Target false discovery rate.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Disable weekly-pattern adjustment.
    #[arg(long)]
    pub no_seasonal: bool,

    /// Procedures to run, comma-separated (sast+, lord, saffron, addis).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output CSV path.
    #[arg(long)]
    pub output: PathBuf,

    /// TOML config file (its `[sim]` table); flags override.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Master RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Rate multipliers as three comma-separated values, e.g. 0.8,1,1.2.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,

    /// Exposure window length in days.
    #[arg(long)]
    pub d: Option<usize>,

    /// Generate without the weekly intensity pattern.
    #[arg(long)]
    pub no_seasonal: bool,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Output directory for metrics CSVs and report.json.
    #[arg(long)]
    pub output: PathBuf,

    /// TOML config file (its `[sim]` table); flags override.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Which scenario set to run.
    #[arg(long, value_enum, default_value_t = Scenario::All)]
    pub scenario: Scenario,

    /// Replications per scenario.
    #[arg(long)]
    pub reps: Option<usize>,

    /// Master RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Target false discovery rate.
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// Benchmark scenario sets.
#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Four rate settings, no weekly pattern.
    Table1,
    /// Four rate settings, with weekly pattern generated and adjusted.
    Table2,
    /// 2×2 model-mismatch grid at the (0.9, 1, 1.1) rate setting.
    Table3,
    /// Everything above.
    All,
}
