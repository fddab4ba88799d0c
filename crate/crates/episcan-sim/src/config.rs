//! Simulation configuration and the standard benchmark scenarios.

use crate::error::{Result, SimError};
use episcan_core::analysis::AnalysisConfig;
use episcan_core::hmm::DEFAULT_TRANSITION;
use serde::{Deserialize, Serialize};

/// Rate-multiplier triples for the four standard difficulty settings, from
/// well-separated regimes down to barely-separated ones.
pub const GAMMA_SCENARIOS: [[f64; 3]; 4] = [
    [0.80, 1.0, 1.20],
    [0.85, 1.0, 1.15],
    [0.90, 1.0, 1.10],
    [0.95, 1.0, 1.05],
];

/// Weekly log-effects used by the seasonal benchmark scenarios: strong early
/// week, depressed weekend, summing to zero.
pub const WEEKLY_EFFECTS: [f64; 7] = [0.1, 0.05, 0.0, 0.0, 0.0, -0.1, -0.05];

/// Compact scenario label for a rate triple, e.g. `gamma_0.8_1_1.2`.
pub fn gamma_label(gamma: &[f64; 3]) -> String {
    format!("gamma_{}_{}_{}", gamma[0], gamma[1], gamma[2])
}

/// Everything that determines a synthetic epidemic and its analysis.
///
/// The generated series has three segments laid end to end:
///
/// ```text
/// [0 .. d)                  warm-up: counts pinned at `seed_count`
/// [d .. d+burn_in)          burn-in: stochastic, excluded from testing
/// [d+burn_in .. +t_total)   evaluation window: stochastic, tested
/// ```
///
/// Only evaluation days `h+1 ..= t_total` are scored: the first `h` form the
/// detector's initialization window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Per-state rate multipliers (decreasing, stationary, increasing).
    pub gamma: [f64; 3],
    /// Row-stochastic transition matrix of the hidden chain.
    pub a: [[f64; 3]; 3],
    /// Weekly log-effects applied to the generator's intensity; `None`
    /// generates without any weekly pattern.
    pub seasonal: Option<[f64; 7]>,
    /// Whether the *analysis* estimates and removes a weekly pattern. Kept
    /// separate from `seasonal` so misspecified combinations can be studied.
    pub adjust_seasonal: bool,
    /// Rolling-exposure window length in days.
    pub d: usize,
    /// Length of the evaluation window in days.
    pub t_total: usize,
    /// Stochastic days between warm-up and the evaluation window.
    pub burn_in: usize,
    /// Daily case count during the warm-up segment.
    pub seed_count: u64,
    /// Target false discovery rate.
    pub alpha: f64,
    /// Estimation window length used by the detector.
    pub h: usize,
    /// Monte-Carlo replications.
    pub n_reps: usize,
    /// Force the first post-warm-up hidden state (1-based). `None` draws it
    /// from the stationary distribution of `a`. Forcing exists for generator
    /// calibration checks; benchmark runs leave it unset.
    pub start_state: Option<u8>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gamma: GAMMA_SCENARIOS[0],
            a: DEFAULT_TRANSITION,
            seasonal: None,
            adjust_seasonal: false,
            d: 7,
            t_total: 530,
            burn_in: 30,
            seed_count: 2000,
            alpha: 0.05,
            h: 30,
            n_reps: 200,
            start_state: None,
        }
    }
}

impl SimConfig {
    /// Defaults with the given rate triple; no weekly pattern on either side.
    pub fn with_gamma(gamma: [f64; 3]) -> Self {
        Self { gamma, ..Self::default() }
    }

    /// Defaults with the given rate triple, generating *and* adjusting for
    /// the standard weekly pattern.
    pub fn with_seasonal(gamma: [f64; 3]) -> Self {
        Self {
            gamma,
            seasonal: Some(WEEKLY_EFFECTS),
            adjust_seasonal: true,
            ..Self::default()
        }
    }

    /// Full generated length: warm-up + burn-in + evaluation window.
    pub fn series_len(&self) -> usize {
        self.d + self.burn_in + self.t_total
    }

    /// Leading observations that only provide exposure/seasonal context.
    pub fn context_len(&self) -> usize {
        self.d + self.burn_in
    }

    /// The matching analysis configuration for this scenario.
    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            d: self.d,
            h: self.h,
            alpha: self.alpha,
            seasonal: self.adjust_seasonal,
            context_len: self.context_len(),
            ..AnalysisConfig::default()
        }
    }

    /// Check every generation-level constraint.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| Err(SimError::InvalidConfig { field, reason });
        if self.gamma.iter().any(|&g| !g.is_finite() || g <= 0.0) {
            return bad("gamma", format!("rate multipliers {:?} must be finite and positive", self.gamma));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return bad("a", format!("row {i} has a negative or non-finite entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return bad("a", format!("row {i} sums to {s}, expected 1 within 1e-12"));
            }
        }
        if let Some(effects) = &self.seasonal {
            if effects.iter().any(|e| !e.is_finite()) {
                return bad("seasonal", "weekly effects must be finite".into());
            }
        }
        if self.d == 0 {
            return bad("d", "exposure window must cover at least one day".into());
        }
        if self.t_total == 0 {
            return bad("t_total", "evaluation window must be non-empty".into());
        }
        if self.seed_count == 0 {
            return bad("seed_count", "warm-up needs at least one case per day".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("target level {} must lie strictly inside (0, 1)", self.alpha));
        }
        if self.h < 10 {
            return bad("h", format!("window length {} too short to fit the model (need ≥ 10)", self.h));
        }
        if self.n_reps == 0 {
            return bad("n_reps", "need at least one replication".into());
        }
        if let Some(s) = self.start_state {
            if !(1..=3).contains(&s) {
                return bad("start_state", format!("state {s} outside 1..=3"));
            }
        }
        Ok(())
    }
}

/// Unique stationary distribution of a 3-state row-stochastic matrix.
///
/// Uses the spanning-tree closed form (Markov chain tree theorem): the
/// stationary mass of state `i` is proportional to the total weight of
/// directed spanning trees rooted at `i`, where an edge `u → v` carries
/// weight `a[u][v]`. For three states each root has exactly three trees, so
/// the formula is exact arithmetic with no elimination or iteration. Fails
/// when every tree weight is zero, i.e. the chain is reducible and no unique
/// stationary distribution exists (the identity matrix, for instance).
pub fn stationary_of(a: &[[f64; 3]; 3]) -> Result<[f64; 3]> {
    let t0 = a[1][0] * a[2][0] + a[2][1] * a[1][0] + a[1][2] * a[2][0];
    let t1 = a[0][1] * a[2][1] + a[2][0] * a[0][1] + a[0][2] * a[2][1];
    let t2 = a[0][2] * a[1][2] + a[1][0] * a[0][2] + a[0][1] * a[1][2];
    let total = t0 + t1 + t2;
    if !(total.is_finite() && total > 0.0) {
        return Err(SimError::DegenerateChain {
            reason: format!("spanning-tree weights sum to {total}; chain is reducible"),
        });
    }
    Ok([t0 / total, t1 / total, t2 / total])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_config_validates() {
        SimConfig::default().validate().unwrap();
        SimConfig::with_gamma(GAMMA_SCENARIOS[3]).validate().unwrap();
        SimConfig::with_seasonal(GAMMA_SCENARIOS[0]).validate().unwrap();
    }

    #[test]
    fn bad_fields_are_rejected() {
        let ok = SimConfig::default;
        assert!(SimConfig { gamma: [0.8, -1.0, 1.2], ..ok() }.validate().is_err());
        assert!(SimConfig { alpha: 0.0, ..ok() }.validate().is_err());
        assert!(SimConfig { alpha: 1.0, ..ok() }.validate().is_err());
        assert!(SimConfig { d: 0, ..ok() }.validate().is_err());
        assert!(SimConfig { h: 5, ..ok() }.validate().is_err());
        assert!(SimConfig { t_total: 0, ..ok() }.validate().is_err());
        assert!(SimConfig { seed_count: 0, ..ok() }.validate().is_err());
        assert!(SimConfig { n_reps: 0, ..ok() }.validate().is_err());
        assert!(SimConfig { start_state: Some(4), ..ok() }.validate().is_err());
        let mut lopsided = ok();
        lopsided.a[0] = [0.5, 0.4, 0.2];
        assert!(lopsided.validate().is_err());
    }

    #[test]
    fn weekly_effects_sum_to_zero() {
        assert!(WEEKLY_EFFECTS.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn stationary_matches_hand_solution() {
        // For the default transition matrix the balance equations solve to
        // (7/63, 30/63, 26/63) exactly.
        let pi = stationary_of(&DEFAULT_TRANSITION).unwrap();
        let expected = [7.0 / 63.0, 30.0 / 63.0, 26.0 / 63.0];
        for i in 0..3 {
            assert!((pi[i] - expected[i]).abs() < 1e-14, "pi[{i}] = {}", pi[i]);
        }
    }

    #[test]
    fn stationary_satisfies_balance_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut a = [[0.0f64; 3]; 3];
            for row in a.iter_mut() {
                let raw: [f64; 3] = [rng.gen::<f64>() + 1e-3, rng.gen::<f64>() + 1e-3, rng.gen::<f64>() + 1e-3];
                let s: f64 = raw.iter().sum();
                for (dst, v) in row.iter_mut().zip(raw) {
                    *dst = v / s;
                }
            }
            let pi = stationary_of(&a).unwrap();
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..3 {
                let balance: f64 = (0..3).map(|i| pi[i] * a[i][j]).sum();
                assert!((balance - pi[j]).abs() < 1e-12, "pi A != pi at column {j}");
            }
        }
    }

    #[test]
    fn reducible_chain_is_degenerate() {
        let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(stationary_of(&identity), Err(SimError::DegenerateChain { .. })));
    }

    #[test]
    fn labels_are_csv_safe() {
        for gamma in &GAMMA_SCENARIOS {
            let label = gamma_label(gamma);
            assert!(!label.contains(',') && !label.contains(' '), "{label}");
        }
        assert_eq!(gamma_label(&[0.8, 1.0, 1.2]), "gamma_0.8_1_1.2");
    }
}
