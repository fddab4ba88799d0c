//! Golden operating points and acceptance bands for the benchmark
//! scenarios.
//!
//! The golden values are (FDR, TPR) pairs per method estimated at
//! large replication count (500 reps); desk-scale runs (200 reps) land
//! near them but not on them, so pass/fail is judged against explicit
//! bands, with the golden values reported alongside for context.

use episcan_sim::{MetricsTable, METHOD_NAMES, N_METHODS};
use serde::Serialize;

/// Golden (FDR, TPR) per method, in [`METHOD_NAMES`] order, keyed by the
/// scenario label the benchmark emits.
pub type GoldenRow = (&'static str, [(f64, f64); N_METHODS]);

pub const TABLE1_GOLDEN: [GoldenRow; 4] = [
    ("gamma_0.8_1_1.2", [(0.000, 1.000), (0.000, 1.000), (0.004, 1.000), (0.031, 1.000), (0.042, 1.000)]),
    ("gamma_0.85_1_1.15", [(0.001, 1.000), (0.000, 1.000), (0.004, 1.000), (0.032, 1.000), (0.042, 1.000)]),
    ("gamma_0.9_1_1.1", [(0.015, 1.000), (0.001, 0.998), (0.004, 0.993), (0.032, 0.998), (0.042, 0.998)]),
    ("gamma_0.95_1_1.05", [(0.058, 0.978), (0.045, 0.931), (0.004, 0.650), (0.031, 0.837), (0.041, 0.839)]),
];

pub const TABLE2_GOLDEN: [GoldenRow; 4] = [
    ("gamma_0.8_1_1.2", [(0.024, 0.979), (0.038, 0.985), (0.296, 0.999), (0.316, 0.999), (0.333, 1.000)]),
    ("gamma_0.85_1_1.15", [(0.028, 0.982), (0.036, 0.985), (0.255, 0.997), (0.285, 0.998), (0.309, 0.999)]),
    ("gamma_0.9_1_1.1", [(0.050, 0.983), (0.042, 0.977), (0.169, 0.977), (0.218, 0.989), (0.251, 0.992)]),
    ("gamma_0.95_1_1.05", [(0.082, 0.936), (0.090, 0.897), (0.034, 0.640), (0.091, 0.806), (0.109, 0.824)]),
];

pub const TABLE3_GOLDEN: [GoldenRow; 4] = [
    ("plain_fit_plain", [(0.000, 1.000), (0.000, 1.000), (0.090, 1.000), (0.113, 1.000), (0.172, 1.000)]),
    ("plain_fit_seasonal", [(0.022, 0.995), (0.022, 0.976), (0.026, 0.874), (0.054, 0.917), (0.076, 0.934)]),
    ("seasonal_fit_plain", [(0.209, 0.797), (0.197, 0.724), (0.193, 0.761), (0.201, 0.810), (0.219, 0.814)]),
    ("seasonal_fit_seasonal", [(0.019, 0.947), (0.042, 0.974), (0.219, 0.999), (0.246, 0.999), (0.287, 1.000)]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Fdr,
    Tpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cmp {
    AtMost,
    AtLeast,
}

/// One pass/fail constraint on an aggregated estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BandCheck {
    pub scenario: &'static str,
    pub method: &'static str,
    pub metric: Metric,
    pub cmp: Cmp,
    pub bound: f64,
}

impl BandCheck {
    const fn at_most(scenario: &'static str, method: &'static str, metric: Metric, bound: f64) -> Self {
        Self { scenario, method, metric, cmp: Cmp::AtMost, bound }
    }

    const fn at_least(scenario: &'static str, method: &'static str, metric: Metric, bound: f64) -> Self {
        Self { scenario, method, metric, cmp: Cmp::AtLeast, bound }
    }
}

/// Bands for the plain four-scenario sweep: error stays controlled
/// everywhere, power stays high except in the hardest setting.
pub fn table1_checks() -> Vec<BandCheck> {
    let mut checks = Vec::new();
    for (scenario, _) in TABLE1_GOLDEN {
        checks.push(BandCheck::at_most(scenario, "sast+", Metric::Fdr, 0.07));
    }
    for (scenario, _) in &TABLE1_GOLDEN[..3] {
        checks.push(BandCheck::at_least(scenario, "sast+", Metric::Tpr, 0.99));
    }
    checks.push(BandCheck::at_least(TABLE1_GOLDEN[3].0, "sast+", Metric::Tpr, 0.85));
    checks
}

/// Band for the seasonal sweep: the adjusted detector keeps control while
/// the unadjusted p-value baseline visibly loses it.
pub fn table2_checks() -> Vec<BandCheck> {
    let scenario = TABLE2_GOLDEN[0].0;
    vec![
        BandCheck::at_most(scenario, "sast+", Metric::Fdr, 0.10),
        BandCheck::at_least(scenario, "lord", Metric::Fdr, 0.15),
    ]
}

/// Bands for the mismatch grid: skipping a real weekly pattern inflates
/// the error rate, adjusting for it repairs it.
pub fn table3_checks() -> Vec<BandCheck> {
    vec![
        BandCheck::at_least("seasonal_fit_plain", "sast+", Metric::Fdr, 0.12),
        BandCheck::at_most("seasonal_fit_seasonal", "sast+", Metric::Fdr, 0.10),
    ]
}

/// A [`BandCheck`] evaluated against an observed table.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    #[serde(flatten)]
    pub check: BandCheck,
    pub observed: f64,
    pub golden: f64,
    pub pass: bool,
}

fn lookup(tables: &[MetricsTable], scenario: &str, method: &str, metric: Metric) -> Option<f64> {
    let table = tables.iter().find(|t| t.scenario == scenario)?;
    let row = table.row(method)?;
    Some(match metric {
        Metric::Fdr => row.fdr,
        Metric::Tpr => row.tpr,
    })
}

fn golden_value(golden: &[GoldenRow], scenario: &str, method: &str, metric: Metric) -> f64 {
    let Some((_, row)) = golden.iter().find(|(s, _)| *s == scenario) else {
        return f64::NAN;
    };
    let Some(idx) = METHOD_NAMES.iter().position(|&m| m == method) else {
        return f64::NAN;
    };
    match metric {
        Metric::Fdr => row[idx].0,
        Metric::Tpr => row[idx].1,
    }
}

/// Evaluate every check against the observed tables. A scenario or method
/// missing from the observations fails its check (observed = NaN).
pub fn evaluate_checks(
    tables: &[MetricsTable],
    checks: &[BandCheck],
    golden: &[GoldenRow],
) -> Vec<CheckResult> {
    checks
        .iter()
        .map(|&check| {
            let observed =
                lookup(tables, check.scenario, check.method, check.metric).unwrap_or(f64::NAN);
            let pass = match check.cmp {
                Cmp::AtMost => observed <= check.bound,
                Cmp::AtLeast => observed >= check.bound,
            };
            CheckResult {
                check,
                observed,
                golden: golden_value(golden, check.scenario, check.method, check.metric),
                pass,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use episcan_sim::MethodMetrics;

    fn fake_table(scenario: &str, sast_fdr: f64, sast_tpr: f64, lord_fdr: f64) -> MetricsTable {
        let mut rows = Vec::new();
        for &name in METHOD_NAMES.iter() {
            let (fdr, tpr) = match name {
                "sast+" => (sast_fdr, sast_tpr),
                "lord" => (lord_fdr, 0.9),
                _ => (0.01, 0.99),
            };
            rows.push(MethodMetrics { method: name.to_string(), fdr, tpr, se_fdr: 0.0, se_tpr: 0.0 });
        }
        MetricsTable { scenario: scenario.to_string(), rows, n_reps: 1, failed_reps: 0 }
    }

    #[test]
    fn golden_rows_align_with_benchmark_labels() {
        use episcan_sim::{gamma_label, GAMMA_SCENARIOS};
        for (i, gamma) in GAMMA_SCENARIOS.iter().enumerate() {
            assert_eq!(TABLE1_GOLDEN[i].0, gamma_label(gamma));
            assert_eq!(TABLE2_GOLDEN[i].0, gamma_label(gamma));
        }
    }

    #[test]
    fn in_band_observations_pass() {
        let tables: Vec<MetricsTable> = TABLE1_GOLDEN
            .iter()
            .map(|(s, _)| fake_table(s, 0.02, 0.999, 0.01))
            .collect();
        let results = evaluate_checks(&tables, &table1_checks(), &TABLE1_GOLDEN);
        assert_eq!(results.len(), 8);
        assert!(results.iter().all(|r| r.pass));
    }

    #[test]
    fn out_of_band_observations_fail() {
        let tables = vec![fake_table(TABLE2_GOLDEN[0].0, 0.25, 0.99, 0.02)];
        let results = evaluate_checks(&tables, &table2_checks(), &TABLE2_GOLDEN);
        assert!(results.iter().all(|r| !r.pass), "{results:?}");
        // Golden context rides along for the report.
        assert_eq!(results[0].golden, 0.038);
    }

    #[test]
    fn missing_scenario_fails_not_panics() {
        let results = evaluate_checks(&[], &table3_checks(), &TABLE3_GOLDEN);
        assert!(results.iter().all(|r| !r.pass && r.observed.is_nan()));
    }
}
