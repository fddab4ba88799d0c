//! Config-file loading and flag merging.
//!
//! Precedence: command-line flags override config-file values, which
//! override built-in defaults. The TOML file has two optional tables,
//! `[analysis]` and `[sim]`, whose keys mirror the corresponding config
//! structs; any key left out takes its default.

use crate::cli::{AnalyzeArgs, SimulateArgs};
use anyhow::{bail, Context, Result};
use episcan_core::{AnalysisConfig, Method};
use episcan_sim::SimConfig;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub analysis: Option<AnalysisConfig>,
    pub sim: Option<SimConfig>,
}

pub fn load_file(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in names {
        let m = Method::parse(name)
            .with_context(|| format!("field `methods`: unknown procedure `{name}`"))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Extra constraints the analysis surface promises beyond the core ones.
fn validate_analysis(cfg: &AnalysisConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.d >= cfg.h {
        bail!("field `d`: exposure window {} must be smaller than the estimation window h = {}", cfg.d, cfg.h);
    }
    Ok(())
}

/// Final analysis configuration for `analyze`.
pub fn analysis_config(args: &AnalyzeArgs, file: &FileConfig) -> Result<AnalysisConfig> {
    let mut cfg = file.analysis.clone().unwrap_or_default();
    if let Some(d) = args.d {
        cfg.d = d;
    }
    if let Some(h) = args.h {
        cfg.h = h;
    }
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if args.no_seasonal {
        cfg.seasonal = false;
    }
    if let Some(methods) = &args.methods {
        cfg.methods = parse_methods(methods)?;
    }
    validate_analysis(&cfg)?;
    Ok(cfg)
}

/// Final simulation configuration for `simulate`.
pub fn simulate_config(args: &SimulateArgs, file: &FileConfig) -> Result<SimConfig> {
    let mut cfg = file.sim.clone().unwrap_or_default();
    if let Some(gamma) = &args.gamma {
        let [g1, g2, g3] = gamma.as_slice() else {
            bail!("field `gamma`: need exactly three comma-separated values, got {}", gamma.len());
        };
        cfg.gamma = [*g1, *g2, *g3];
    }
    if let Some(d) = args.d {
        cfg.d = d;
    }
    if args.no_seasonal {
        cfg.seasonal = None;
        cfg.adjust_seasonal = false;
    }
    cfg.validate()?;
    Ok(cfg)
}
