//! Per-run scoring and Monte-Carlo aggregation across replications.

use crate::config::{SimConfig, WEEKLY_EFFECTS};
use crate::error::{Result, SimError};
use crate::generate::{generate_series, RunTruth};
use crate::oracle::oracle_rejections;
use episcan_core::{run_sast_plus, Method};
use rayon::prelude::*;
use serde::Serialize;
use std::ops::RangeInclusive;

/// Evaluated methods, in report order: the offline oracle first, then the
/// online procedures in the order of [`Method::ALL`].
pub const N_METHODS: usize = 5;
pub const METHOD_NAMES: [&str; N_METHODS] = ["oracle", "sast+", "lord", "saffron", "addis"];

/// False discovery proportion and true positive proportion of one rejection
/// set against the true state path.
///
/// `theta` covers the whole series, indexed by 1-based time `t ↔
/// theta[t-1]`; `rejections` and `test_range` use the same 1-based time. A
/// rejection is false when the state is 1 or 2, true when it is 3; empty
/// denominators follow the `max(·, 1)` convention, so an empty rejection set
/// scores (0, 0).
pub fn evaluate_single(
    theta: &[u8],
    rejections: &[usize],
    test_range: RangeInclusive<usize>,
) -> Result<(f64, f64)> {
    let (lo, hi) = (*test_range.start(), *test_range.end());
    if lo == 0 || hi > theta.len() || lo > hi {
        return Err(SimError::InvalidConfig {
            field: "test_range",
            reason: format!("{lo}..={hi} does not fit a series of length {}", theta.len()),
        });
    }
    if let Some((index, &value)) = theta.iter().enumerate().find(|(_, &v)| !(1..=3).contains(&v)) {
        return Err(SimError::InvalidState { value, index });
    }
    let mut false_pos = 0usize;
    let mut true_pos = 0usize;
    for &t in rejections {
        if t < lo || t > hi {
            return Err(SimError::RejectionOutOfRange { t, lo, hi });
        }
        if theta[t - 1] == 3 {
            true_pos += 1;
        } else {
            false_pos += 1;
        }
    }
    let alts = (lo..=hi).filter(|&t| theta[t - 1] == 3).count();
    let fdp = false_pos as f64 / rejections.len().max(1) as f64;
    let tpp = true_pos as f64 / alts.max(1) as f64;
    Ok((fdp, tpp))
}

/// [`evaluate_single`] applied to every method's rejection set in `truth`,
/// in the same order.
pub fn evaluate_run(truth: &RunTruth, test_range: RangeInclusive<usize>) -> Result<Vec<(f64, f64)>> {
    truth
        .rejections
        .iter()
        .map(|r| evaluate_single(&truth.theta, r, test_range.clone()))
        .collect()
}

/// One replication's scores, per method.
#[derive(Clone, Copy, Debug)]
struct RepOutcome {
    fdp: [f64; N_METHODS],
    tpp: [f64; N_METHODS],
}

/// Aggregated error/power estimates for one method.
#[derive(Clone, Debug, Serialize)]
pub struct MethodMetrics {
    pub method: String,
    /// Mean false discovery proportion across replications.
    pub fdr: f64,
    /// Mean true positive proportion across replications.
    pub tpr: f64,
    /// Monte-Carlo standard errors of the two means (0 for a single rep).
    pub se_fdr: f64,
    pub se_tpr: f64,
}

/// One scenario's results across all methods.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsTable {
    pub scenario: String,
    pub rows: Vec<MethodMetrics>,
    /// Replications contributing to the means.
    pub n_reps: usize,
    /// Replications that errored and were excluded.
    pub failed_reps: usize,
}

impl MetricsTable {
    pub const CSV_HEADER: &'static str = "scenario,method,fdr,tpr,se_fdr,se_tpr,n_reps";

    /// Data rows in the header's column order, without the header.
    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{}",
                    self.scenario, r.method, r.fdr, r.tpr, r.se_fdr, r.se_tpr, self.n_reps
                )
            })
            .collect()
    }

    /// Complete CSV document for this table alone.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        for row in self.csv_rows() {
            out.push('\n');
            out.push_str(&row);
        }
        out.push('\n');
        out
    }

    pub fn row(&self, method: &str) -> Option<&MethodMetrics> {
        self.rows.iter().find(|r| r.method == method)
    }
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Generate, analyze, and score a single replication.
///
/// Returns per-method (FDP, TPP) over the scored days — evaluation days
/// `h+1 ..= t_total`, excluding the detector's initialization block, which
/// is also outside every online procedure's decision stream.
fn run_one(cfg: &SimConfig, master_seed: u64, rep: u64) -> Result<RepOutcome> {
    let (obs, mut truth) = generate_series(cfg, master_seed, rep)?;
    let log = run_sast_plus(&obs, &cfg.analysis_config())?;

    let lo = cfg.context_len() + cfg.h + 1;
    let hi = cfg.context_len() + cfg.t_total;
    truth.rejections = Vec::with_capacity(N_METHODS);
    truth.rejections.push(oracle_rejections(cfg, &obs)?);
    for m in Method::ALL {
        let in_range = log.rejections(m).into_iter().filter(|&t| (lo..=hi).contains(&t)).collect();
        truth.rejections.push(in_range);
    }

    let pairs = evaluate_run(&truth, lo..=hi)?;
    let mut out = RepOutcome { fdp: [0.0; N_METHODS], tpp: [0.0; N_METHODS] };
    for (i, (fdp, tpp)) in pairs.into_iter().enumerate() {
        out.fdp[i] = fdp;
        out.tpp[i] = tpp;
    }
    Ok(out)
}

/// Estimate FDR and TPR for every method by replication.
///
/// Replication `rep` runs on substream `rep` of `master_seed`, so the set of
/// generated series is fixed by `(cfg, master_seed)` alone. Replications run
/// in parallel; results are collected back in replication order and reduced
/// sequentially, so estimates are bit-identical regardless of scheduling.
/// Failed replications are excluded from the means and counted in
/// `failed_reps`; only a run with no surviving replication is an error.
pub fn monte_carlo(cfg: &SimConfig, master_seed: u64, scenario: &str) -> Result<MetricsTable> {
    cfg.validate()?;
    if cfg.t_total < cfg.h + 1 {
        return Err(SimError::InvalidConfig {
            field: "t_total",
            reason: format!(
                "evaluation window {} leaves no scored days after the {}-day initialization block",
                cfg.t_total, cfg.h
            ),
        });
    }

    let results: Vec<Result<RepOutcome>> = (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|rep| run_one(cfg, master_seed, rep))
        .collect();

    let mut outcomes = Vec::with_capacity(results.len());
    let mut failed = 0usize;
    let mut last_error = String::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                failed += 1;
                last_error = e.to_string();
            }
        }
    }
    if outcomes.is_empty() {
        return Err(SimError::AllRepsFailed { attempted: cfg.n_reps, last: last_error });
    }

    let rows = (0..N_METHODS)
        .map(|m| {
            let (fdr, se_fdr) = mean_se(outcomes.iter().map(move |o| o.fdp[m]));
            let (tpr, se_tpr) = mean_se(outcomes.iter().map(move |o| o.tpp[m]));
            MethodMetrics { method: METHOD_NAMES[m].to_string(), fdr, tpr, se_fdr, se_tpr }
        })
        .collect();

    Ok(MetricsTable {
        scenario: scenario.to_string(),
        rows,
        n_reps: outcomes.len(),
        failed_reps: failed,
    })
}

/// The 2×2 model-mismatch grid: generate with/without the weekly pattern ×
/// analyze with/without adjustment.
///
/// The pattern for the "with" cells comes from `base.seasonal`, falling back
/// to [`WEEKLY_EFFECTS`]; cells sharing a truth setting reuse the same
/// master seed and therefore score the *same* generated series, isolating
/// the effect of the analysis choice. Tables come back in the order
/// plain/plain, plain/seasonal, seasonal/plain, seasonal/seasonal
/// (truth first, analysis second).
pub fn misspecification_suite(base: &SimConfig, master_seed: u64) -> Result<Vec<MetricsTable>> {
    let effects = base.seasonal.unwrap_or(WEEKLY_EFFECTS);
    let cells = [
        (false, false, "plain_fit_plain"),
        (false, true, "plain_fit_seasonal"),
        (true, false, "seasonal_fit_plain"),
        (true, true, "seasonal_fit_seasonal"),
    ];
    cells
        .into_iter()
        .map(|(truth_weekly, fit_weekly, label)| {
            let mut cfg = base.clone();
            cfg.seasonal = truth_weekly.then_some(effects);
            cfg.adjust_seasonal = fit_weekly;
            monte_carlo(&cfg, master_seed, label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small-but-real pipeline config: short evaluation window, few reps.
    fn tiny(n_reps: usize) -> SimConfig {
        SimConfig { t_total: 120, n_reps, ..SimConfig::default() }
    }

    #[test]
    fn worked_example_half_false_one_tenth_power() {
        // R = {5, 6} with θ_5 = 3 (hit) and θ_6 = 2 (false alarm), and ten
        // alternatives in range: FDP = 1/2, TPP = 1/10.
        let mut theta = vec![2u8; 20];
        for t in [5usize, 7, 8, 9, 10, 11, 12, 13, 14, 15] {
            theta[t - 1] = 3;
        }
        assert_eq!(theta.iter().filter(|&&s| s == 3).count(), 10);
        let (fdp, tpp) = evaluate_single(&theta, &[5, 6], 1..=20).unwrap();
        assert_eq!(fdp, 0.5);
        assert_eq!(tpp, 0.1);
    }

    #[test]
    fn empty_rejections_score_zero_zero() {
        let theta = vec![3u8; 12];
        let (fdp, tpp) = evaluate_single(&theta, &[], 1..=12).unwrap();
        assert_eq!((fdp, tpp), (0.0, 0.0));
    }

    #[test]
    fn perfect_run_scores_zero_one() {
        let mut theta = vec![2u8; 10];
        theta[3] = 3;
        theta[4] = 3;
        let (fdp, tpp) = evaluate_single(&theta, &[4, 5], 1..=10).unwrap();
        assert_eq!((fdp, tpp), (0.0, 1.0));
    }

    #[test]
    fn all_null_range_with_rejections_scores_one_zero() {
        let theta = vec![1u8; 10];
        let (fdp, tpp) = evaluate_single(&theta, &[2, 3], 1..=10).unwrap();
        assert_eq!((fdp, tpp), (1.0, 0.0));
    }

    #[test]
    fn out_of_range_rejection_is_an_error() {
        let theta = vec![2u8; 10];
        assert!(matches!(
            evaluate_single(&theta, &[1], 2..=10),
            Err(SimError::RejectionOutOfRange { t: 1, .. })
        ));
        assert!(evaluate_single(&theta, &[], 0..=10).is_err());
        assert!(evaluate_single(&theta, &[], 1..=11).is_err());
        let bad_state = vec![4u8; 10];
        assert!(matches!(
            evaluate_single(&bad_state, &[], 1..=10),
            Err(SimError::InvalidState { .. })
        ));
    }

    #[test]
    fn evaluate_run_scores_each_method_in_order() {
        let mut theta = vec![2u8; 10];
        theta[5] = 3;
        let truth = RunTruth { theta, rejections: vec![vec![6], vec![], vec![4, 6]] };
        let scores = evaluate_run(&truth, 1..=10).unwrap();
        assert_eq!(scores, vec![(0.0, 1.0), (0.0, 0.0), (0.5, 1.0)]);
    }

    #[test]
    fn mean_se_matches_hand_computation() {
        let (m, se) = mean_se([1.0f64, 2.0, 3.0, 4.0].into_iter());
        assert!((m - 2.5).abs() < 1e-15);
        // Sample variance 5/3, SE = sqrt(5/12).
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        let (m1, se1) = mean_se(std::iter::once(0.7));
        assert_eq!((m1, se1), (0.7, 0.0));
    }

    #[test]
    fn monte_carlo_produces_sane_deterministic_tables() {
        let cfg = tiny(3);
        let table = monte_carlo(&cfg, 2024, "smoke").unwrap();
        assert_eq!(table.scenario, "smoke");
        assert_eq!(table.n_reps, 3);
        assert_eq!(table.failed_reps, 0);
        assert_eq!(table.rows.len(), N_METHODS);
        for (row, name) in table.rows.iter().zip(METHOD_NAMES) {
            assert_eq!(row.method, name);
            for v in [row.fdr, row.tpr, row.se_fdr, row.se_tpr] {
                assert!(v.is_finite() && (0.0..=1.0).contains(&v), "{name}: {v}");
            }
        }
        let again = monte_carlo(&cfg, 2024, "smoke").unwrap();
        assert_eq!(table.to_csv(), again.to_csv(), "scheduling must not change estimates");
    }

    #[test]
    fn single_rep_table_equals_that_run() {
        let cfg = tiny(1);
        let table = monte_carlo(&cfg, 5, "one").unwrap();
        let single = run_one(&cfg, 5, 0).unwrap();
        for (m, row) in table.rows.iter().enumerate() {
            assert_eq!(row.fdr, single.fdp[m]);
            assert_eq!(row.tpr, single.tpp[m]);
            assert_eq!((row.se_fdr, row.se_tpr), (0.0, 0.0));
        }
    }

    #[test]
    fn csv_is_well_formed() {
        let cfg = tiny(2);
        let table = monte_carlo(&cfg, 7, "csv_check").unwrap();
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(MetricsTable::CSV_HEADER));
        let mut rows = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7, "line {line}");
            assert_eq!(fields[0], "csv_check");
            for f in &fields[2..6] {
                f.parse::<f64>().unwrap();
            }
            assert_eq!(fields[6].parse::<usize>().unwrap(), table.n_reps);
            rows += 1;
        }
        assert_eq!(rows, N_METHODS);
    }

    #[test]
    fn misspecification_grid_covers_four_cells() {
        let base = SimConfig { t_total: 100, n_reps: 2, ..SimConfig::default() };
        let tables = misspecification_suite(&base, 31).unwrap();
        assert_eq!(tables.len(), 4);
        let labels: Vec<&str> = tables.iter().map(|t| t.scenario.as_str()).collect();
        assert_eq!(
            labels,
            ["plain_fit_plain", "plain_fit_seasonal", "seasonal_fit_plain", "seasonal_fit_seasonal"]
        );
        for t in &tables {
            assert_eq!(t.rows.len(), N_METHODS);
            assert_eq!(t.n_reps, 2);
        }
    }

    #[test]
    fn scored_range_excludes_initialization_block() {
        // A config whose evaluation window exactly equals the initialization
        // block has nothing left to score and must refuse to run.
        let cfg = SimConfig { t_total: 30, n_reps: 1, ..SimConfig::default() };
        assert!(matches!(
            monte_carlo(&cfg, 1, "degenerate"),
            Err(SimError::InvalidConfig { field: "t_total", .. })
        ));
    }
}
