//! File emission: decision logs, summaries, and metrics tables.
//!
//! Everything written here is deterministic for a given input and
//! configuration — no timestamps, no machine state, fixed field order —
//! so reruns produce byte-identical files.

use crate::ingest::IngestReport;
use anyhow::{Context, Result};
use chrono::NaiveDate;
use episcan_core::{infectious_pool, AnalysisConfig, DecisionLog, Method, ObservationSeries};
use episcan_sim::{MetricsTable, RunTruth};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// First date stamped onto generated series. A Monday, so the weekday
/// phase of the written file equals the positional phase of the
/// in-memory series and re-ingesting the file reproduces it exactly.
const SIM_EPOCH: (i32, u32, u32) = (2020, 1, 6);

/// Float → CSV field; NaN (undefined) becomes an empty field.
fn field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    Ok(std::io::BufWriter::new(file))
}

/// Per-step decision table, one row per tested observation.
pub fn write_decisions_csv(path: &Path, obs: &ObservationSeries, log: &DecisionLog) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "t,date,J,I,I_adjusted,lis,p_value,barrier,rejected_sastplus,rejected_lord,rejected_saffron,rejected_addis"
    )?;
    for r in log.records() {
        let date = obs
            .dates()
            .map(|dates| dates[r.t - 1].to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            date,
            r.count,
            field(r.exposure_raw),
            field(r.exposure_adjusted),
            field(r.lis),
            field(r.p_value),
            field(r.barrier),
            r.is_rejected(Method::SastPlus),
            r.is_rejected(Method::Lord),
            r.is_rejected(Method::Saffron),
            r.is_rejected(Method::Addis),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Rejection totals per procedure, in fixed order.
#[derive(Debug, Serialize)]
pub struct RejectionCounts {
    pub sast_plus: usize,
    pub lord: usize,
    pub saffron: usize,
    pub addis: usize,
}

impl RejectionCounts {
    pub fn from_log(log: &DecisionLog) -> Self {
        Self {
            sast_plus: log.rejection_count(Method::SastPlus),
            lord: log.rejection_count(Method::Lord),
            saffron: log.rejection_count(Method::Saffron),
            addis: log.rejection_count(Method::Addis),
        }
    }
}

/// Machine-readable run summary written next to decisions.csv.
#[derive(Debug, Serialize)]
pub struct AnalyzeSummary<'a> {
    pub input: String,
    pub location: Option<&'a str>,
    pub observations: usize,
    pub tested: usize,
    pub rejections: RejectionCounts,
    pub em_failures: usize,
    pub config: &'a AnalysisConfig,
    pub ingest: &'a IngestReport,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Generated-series CSV: one row per day with the count, the hidden
/// state, and the raw exposure (empty on day one, where it is undefined).
pub fn write_series_csv(
    path: &Path,
    obs: &ObservationSeries,
    truth: &RunTruth,
    d: usize,
) -> Result<()> {
    let exposure = infectious_pool(obs, d).context("exposure for generated series")?;
    let (y, m, day) = SIM_EPOCH;
    let epoch = NaiveDate::from_ymd_opt(y, m, day).expect("fixed epoch is a valid date");
    let mut w = create(path)?;
    writeln!(w, "date,new_cases,theta,exposure")?;
    for (i, (&count, &theta)) in obs.counts().iter().zip(&truth.theta).enumerate() {
        let date = epoch
            .checked_add_days(chrono::Days::new(i as u64))
            .context("date range overflow")?;
        writeln!(w, "{date},{count},{theta},{}", field(exposure.raw()[i]))?;
    }
    w.flush()?;
    Ok(())
}

/// All tables under one header, rows in table order.
pub fn write_metrics_csv(path: &Path, tables: &[MetricsTable]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", MetricsTable::CSV_HEADER)?;
    for table in tables {
        for row in table.csv_rows() {
            writeln!(w, "{row}")?;
        }
    }
    w.flush()?;
    Ok(())
}
