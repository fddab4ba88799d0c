//! Adaptive-barrier rejection and the shared decision log.
//!
//! The barrier rule works on a window of LIS values (posterior null
//! probabilities): sort ascending, and the barrier is the largest order
//! statistic whose prefix mean is still ≤ α. Rejecting everything at or
//! below the barrier keeps the average posterior null probability of the
//! rejected set — an estimate of the false discovery proportion — at α.
//!
//! Sequential steps additionally enforce a cumulative version of the same
//! constraint (condition C2 below) over all rejections made so far, with
//! each rejected LIS frozen at its decision-time value.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The procedures a decision log can track.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SastPlus,
    Lord,
    Saffron,
    Addis,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SastPlus, Method::Lord, Method::Saffron, Method::Addis];

    pub fn index(self) -> usize {
        match self {
            Method::SastPlus => 0,
            Method::Lord => 1,
            Method::Saffron => 2,
            Method::Addis => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::SastPlus => "sast+",
            Method::Lord => "lord",
            Method::Saffron => "saffron",
            Method::Addis => "addis",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sast+" | "sastplus" | "sast_plus" | "sast" => Some(Method::SastPlus),
            "lord" | "lord++" | "lordpp" | "lord_pp" => Some(Method::Lord),
            "saffron" => Some(Method::Saffron),
            "addis" => Some(Method::Addis),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Largest LIS value whose full lower set — every window value ≤ it, ties
/// included — has mean ≤ α; 0 when even the smallest value fails. Boundary
/// inclusive on both comparisons. This is the empirical plug-in for the
/// population threshold sup{λ : Q(λ) ≤ α}, where Q is the expected false
/// discovery proportion when everything with LIS ≤ λ is rejected.
///
/// Evaluating whole tie groups rather than raw order statistics is what keeps
/// the guarantee meaningful: posteriors saturate to exactly 0.0 and 1.0, and
/// a prefix cut inside a tie group could certify a threshold whose admitted
/// set (which is defined by value, not by sort position) has mean above α.
pub fn adaptive_barrier(lis: &[f64], alpha: f64) -> Result<f64> {
    if lis.is_empty() {
        return Err(Error::EmptyInput { what: "LIS window" });
    }
    check_alpha(alpha)?;
    let mut sorted = lis.to_vec();
    for &v in &sorted {
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "LIS values" });
        }
    }
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut barrier = 0.0;
    let mut prefix = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        prefix += v;
        // Only candidate thresholds at the end of a tie group: {L <= v} is the
        // whole prefix through the last copy of v.
        if sorted.get(k + 1).is_some_and(|&next| next == v) {
            continue;
        }
        if prefix <= alpha * (k + 1) as f64 {
            barrier = v;
        }
    }
    Ok(barrier)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig {
            field: "alpha",
            reason: format!("target level {alpha} must lie strictly inside (0, 1)"),
        });
    }
    Ok(())
}

/// A computed barrier along with the window that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct BarrierState {
    pub lambda_hat: f64,
    pub window_lis: Vec<f64>,
}

impl BarrierState {
    pub fn compute(window_lis: Vec<f64>, alpha: f64) -> Result<Self> {
        let lambda_hat = adaptive_barrier(&window_lis, alpha)?;
        Ok(Self { lambda_hat, window_lis })
    }
}

/// Everything recorded about one tested time point.
#[derive(Clone, Debug, Serialize)]
pub struct DecisionRecord {
    /// 1-based index into the full input series.
    pub t: usize,
    /// Observed count.
    pub count: u64,
    /// Raw rolling-mean exposure.
    pub exposure_raw: f64,
    /// Seasonally adjusted (and floored) exposure the model consumed.
    pub exposure_adjusted: f64,
    /// Posterior null probability under the window fit; NaN if EM failed.
    pub lis: f64,
    /// Baseline upper-tail p-value against the raw exposure.
    pub p_value: f64,
    /// Barrier in force at this step; NaN if EM failed.
    pub barrier: f64,
    /// Rejection flags indexed by [`Method::index`].
    pub rejected: [bool; 4],
    /// True for the batch-tested initialization window.
    pub batch: bool,
    /// Digest of the parameters behind `lis` and `barrier`.
    pub params_hash: u64,
    /// EM did not produce usable parameters at this step.
    pub em_failed: bool,
}

impl DecisionRecord {
    pub fn is_rejected(&self, m: Method) -> bool {
        self.rejected[m.index()]
    }
}

/// Ordered record of every decision, plus the frozen running sum backing
/// condition C2.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DecisionLog {
    pub alpha: f64,
    records: Vec<DecisionRecord>,
    rejected_lis_sum: f64,
    rejected_count: usize,
    /// Windows where EM failed and the step was skipped without a rejection.
    pub em_failures: usize,
}

impl DecisionLog {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, ..Self::default() })
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    /// Sum of LIS values over SAST+ rejections, frozen at decision time.
    pub fn rejected_lis_sum(&self) -> f64 {
        self.rejected_lis_sum
    }

    pub fn rejected_count(&self) -> usize {
        self.rejected_count
    }

    /// Running mean of rejected LIS values; 0 when nothing is rejected yet.
    pub fn running_mean(&self) -> f64 {
        if self.rejected_count == 0 {
            0.0
        } else {
            self.rejected_lis_sum / self.rejected_count as f64
        }
    }

    pub fn push(&mut self, record: DecisionRecord) {
        if record.is_rejected(Method::SastPlus) {
            self.rejected_lis_sum += record.lis;
            self.rejected_count += 1;
        }
        self.records.push(record);
    }

    /// Number of steps where the window refit failed and no test was run.
    pub fn em_failures(&self) -> usize {
        self.records.iter().filter(|r| r.em_failed).count()
    }

    /// Times (1-based series indices) rejected by `method`.
    pub fn rejections(&self, method: Method) -> Vec<usize> {
        self.records.iter().filter(|r| r.is_rejected(method)).map(|r| r.t).collect()
    }

    pub fn rejection_count(&self, method: Method) -> usize {
        self.records.iter().filter(|r| r.is_rejected(method)).count()
    }

    /// Re-derive the C2 invariant from the raw records: the running mean of
    /// rejected LIS values must be ≤ α after the batch window as a whole and
    /// after every sequential record. Returns the largest observed mean, or
    /// an error describing the first violation.
    pub fn verify_c2(&self) -> std::result::Result<f64, String> {
        let mut sum = 0.0f64;
        let mut count = 0usize;
        let mut worst = 0.0f64;
        let mut in_batch = true;
        for (idx, rec) in self.records.iter().enumerate() {
            if in_batch && !rec.batch {
                in_batch = false;
            } else if !in_batch && rec.batch {
                return Err(format!("batch record at position {idx} after sequential records"));
            }
            if rec.is_rejected(Method::SastPlus) {
                sum += rec.lis;
                count += 1;
            }
            let batch_boundary = rec.batch
                && self.records.get(idx + 1).map(|n| !n.batch).unwrap_or(true);
            let must_hold = !rec.batch || batch_boundary;
            if must_hold && count > 0 {
                let mean = sum / count as f64;
                worst = worst.max(mean);
                if sum > self.alpha * count as f64 {
                    return Err(format!(
                        "running mean {mean:.6} exceeds alpha {} after t={}",
                        self.alpha, rec.t
                    ));
                }
            }
        }
        if (sum - self.rejected_lis_sum).abs() > 1e-9 || count != self.rejected_count {
            return Err("cached running totals disagree with records".into());
        }
        Ok(worst)
    }
}

/// SAST+ sequential decision: reject iff the LIS clears the barrier (C1) and
/// folding it into the frozen rejection set keeps the mean ≤ α (C2).
pub fn sast_plus_decide(l_t: f64, barrier: f64, log: &DecisionLog, alpha: f64) -> bool {
    let c1 = l_t <= barrier;
    let c2 = log.rejected_lis_sum + l_t <= alpha * (log.rejected_count + 1) as f64;
    c1 && c2
}
