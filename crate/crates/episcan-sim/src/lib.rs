//! Synthetic epidemic benchmarks for the episcan detection pipeline.
//!
//! The crate generates count series from a known three-state hidden Markov
//! model — the same family the detector assumes, optionally with a weekly
//! intensity pattern — runs the full analysis plus an offline oracle over
//! each series, and scores every method's rejections against the hidden
//! truth. Replicated runs aggregate to FDR/TPR estimates with Monte-Carlo
//! standard errors, reproducible bit for bit from a single master seed.
//!
//! Layout:
//! - [`config`]: scenario definitions and the simulation configuration.
//! - [`generate`]: hidden-chain count generation.
//! - [`oracle`]: the known-parameter offline reference detector.
//! - [`metrics`]: per-run scoring and replicated aggregation.

pub mod config;
pub mod error;
pub mod generate;
pub mod metrics;
pub mod oracle;

pub use config::{gamma_label, stationary_of, SimConfig, GAMMA_SCENARIOS, WEEKLY_EFFECTS};
pub use error::{Result, SimError};
pub use generate::{generate_series, RunTruth};
pub use metrics::{
    evaluate_run, evaluate_single, misspecification_suite, monte_carlo, MethodMetrics,
    MetricsTable, METHOD_NAMES, N_METHODS,
};
pub use oracle::oracle_rejections;
