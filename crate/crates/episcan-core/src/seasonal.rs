//! Multiplicative within-week seasonality, estimated and removed on the log
//! scale.
//!
//! Daily surveillance counts carry strong day-of-week artifacts (reporting
//! backlogs, weekend closures). The model here is
//! `J_t ≈ I_t · exp(s_phase(t))` with one log-effect per phase, centered so
//! the effects sum to zero and the geometric mean of the series is untouched.
//!
//! Estimation is a trimmed-down seasonal-trend decomposition: detrend the
//! log ratio `r_t = log((J_t + ½)/(I_t + ½))` with a centered moving average
//! one period wide, then average the residuals by phase. Weekly data has
//! period 1 and the whole module becomes a no-op.

use crate::error::{Error, Result};
use crate::series::{ExposureSeries, EXPOSURE_FLOOR};
use serde::Serialize;

/// Log-scale seasonal effects, one per phase, summing to zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeasonalProfile {
    effects: Vec<f64>,
}

impl SeasonalProfile {
    /// All-zero profile for a cycle of `period` phases.
    pub fn zero(period: usize) -> Self {
        Self { effects: vec![0.0; period.max(1)] }
    }

    /// Profile from explicit log-effects; they must be finite and sum to
    /// zero within 1e-10.
    pub fn new(effects: Vec<f64>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::EmptyInput { what: "seasonal effects" });
        }
        if effects.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite { what: "seasonal effects" });
        }
        let sum: f64 = effects.iter().sum();
        if sum.abs() > 1e-10 {
            return Err(Error::InvalidParams {
                reason: format!("seasonal effects must sum to zero, got {sum:.3e}"),
            });
        }
        Ok(Self { effects })
    }

    pub fn period(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[f64] {
        &self.effects
    }

    pub fn effect(&self, phase: usize) -> f64 {
        self.effects[phase]
    }

    pub fn is_zero(&self) -> bool {
        self.effects.iter().all(|&e| e == 0.0)
    }
}

/// Log ratio of observed counts to exposure, the raw material for profile
/// estimation. Both sides get a half-count offset so zeros stay finite.
pub fn log_intensity_ratio(counts: &[u64], exposures: &[f64]) -> Result<Vec<f64>> {
    if counts.len() != exposures.len() {
        return Err(Error::LengthMismatch { left: counts.len(), right: exposures.len() });
    }
    exposures
        .iter()
        .zip(counts)
        .map(|(&i, &j)| {
            if !i.is_finite() || i < 0.0 {
                return Err(Error::NonFinite { what: "exposure in log ratio" });
            }
            Ok(((j as f64 + 0.5) / (i + 0.5)).ln())
        })
        .collect()
}

/// Centered moving average of width `period`; even periods take half-weight
/// endpoints over `period + 1` points. Returns `(first_defined, values)`.
fn centered_trend(xs: &[f64], period: usize) -> (usize, Vec<f64>) {
    let half = period / 2;
    let n = xs.len();
    let mut trend = Vec::with_capacity(n - 2 * half);
    if period % 2 == 1 {
        let width = period as f64;
        for i in half..n - half {
            let s: f64 = xs[i - half..=i + half].iter().sum();
            trend.push(s / width);
        }
    } else {
        let width = period as f64;
        for i in half..n - half {
            let mut s = 0.5 * xs[i - half] + 0.5 * xs[i + half];
            s += xs[i - half + 1..i + half].iter().sum::<f64>();
            trend.push(s / width);
        }
    }
    (half, trend)
}

/// Estimate a seasonal profile from log ratios.
///
/// `first_phase` is the phase of `ratios[0]`, so windows can start anywhere
/// in the cycle and still produce phase-aligned effects. Needs at least two
/// full periods of data; period 1 returns the zero profile.
pub fn estimate_seasonal_profile(
    ratios: &[f64],
    period: usize,
    first_phase: usize,
) -> Result<SeasonalProfile> {
    if period == 0 {
        return Err(Error::InvalidConfig {
            field: "period",
            reason: "seasonal period must be positive".into(),
        });
    }
    if period == 1 {
        return Ok(SeasonalProfile::zero(1));
    }
    if first_phase >= period {
        return Err(Error::InvalidConfig {
            field: "first_phase",
            reason: format!("phase {first_phase} out of range for period {period}"),
        });
    }
    if ratios.len() < 2 * period {
        return Err(Error::SeriesTooShort { needed: 2 * period, got: ratios.len() });
    }
    if ratios.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite { what: "log ratios" });
    }

    let (offset, trend) = centered_trend(ratios, period);
    let mut sums = vec![0.0f64; period];
    let mut counts = vec![0usize; period];
    for (k, t) in trend.iter().enumerate() {
        let i = offset + k;
        let phase = (first_phase + i) % period;
        sums[phase] += ratios[i] - t;
        counts[phase] += 1;
    }
    let mut effects: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mean = effects.iter().sum::<f64>() / period as f64;
    for e in &mut effects {
        *e -= mean;
    }
    Ok(SeasonalProfile { effects })
}

/// Divide out the seasonal effect: `Ĩ = max(I, floor) · exp(s_phase)`.
///
/// The floor keeps extinct stretches usable as Poisson rates. Slice version
/// for windowed use; `phases[i]` is the phase of `raw[i]`.
pub fn adjust_values(raw: &[f64], profile: &SeasonalProfile, phases: &[usize]) -> Result<Vec<f64>> {
    if raw.len() != phases.len() {
        return Err(Error::LengthMismatch { left: raw.len(), right: phases.len() });
    }
    let period = profile.period();
    raw.iter()
        .zip(phases)
        .map(|(&v, &p)| {
            if p >= period {
                return Err(Error::InvalidConfig {
                    field: "phases",
                    reason: format!("phase {p} out of range for period {period}"),
                });
            }
            if v.is_nan() {
                return Ok(f64::NAN);
            }
            Ok(v.max(EXPOSURE_FLOOR) * profile.effect(p).exp())
        })
        .collect()
}

/// Whole-series version of [`adjust_values`]; returns a new exposure series
/// with the adjusted column filled in and the raw column untouched.
pub fn adjust_exposure(
    exposure: &ExposureSeries,
    profile: &SeasonalProfile,
    phases: &[usize],
) -> Result<ExposureSeries> {
    let adjusted = adjust_values(exposure.raw(), profile, phases)?;
    Ok(ExposureSeries::from_parts(exposure.raw().to_vec(), adjusted, exposure.d()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_matches_hand_value() {
        let r = log_intensity_ratio(&[20], &[10.0]).unwrap();
        assert!((r[0] - (20.5f64 / 10.5).ln()).abs() < 1e-15);
        assert!((r[0] - 0.669_049_6).abs() < 1e-6);
    }

    #[test]
    fn ratio_survives_zeros() {
        let r = log_intensity_ratio(&[0, 0], &[0.0, 3.0]).unwrap();
        assert!((r[0] - 0.0).abs() < 1e-15);
        assert!((r[1] - (0.5f64 / 3.5).ln()).abs() < 1e-15);
    }

    #[test]
    fn adjustment_multiplies_by_exp_effect() {
        let prof = SeasonalProfile::new(vec![0.1, -0.1]).unwrap();
        let out = adjust_values(&[100.0, 100.0], &prof, &[0, 1]).unwrap();
        assert!((out[0] - 100.0 * 0.1f64.exp()).abs() < 1e-9);
        assert!((out[0] - 110.517_091_8).abs() < 1e-6);
        assert!((out[1] - 100.0 * (-0.1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_profile_only_floors() {
        let prof = SeasonalProfile::zero(7);
        let out = adjust_values(&[0.0, 0.2, 3.0], &prof, &[0, 3, 6]).unwrap();
        assert_eq!(out, vec![0.5, 0.5, 3.0]);
    }

    #[test]
    fn effects_must_center() {
        assert!(SeasonalProfile::new(vec![0.1, 0.1]).is_err());
        assert!(SeasonalProfile::new(vec![0.1, 0.05, 0.0, 0.0, 0.0, -0.1, -0.05]).is_ok());
    }

    #[test]
    fn estimates_recover_known_profile_under_mild_trend() {
        let truth = [0.1, 0.05, 0.0, 0.0, 0.0, -0.1, -0.05];
        let n = 30;
        let ratios: Vec<f64> = (0..n).map(|i| 0.004 * i as f64 + truth[i % 7]).collect();
        let prof = estimate_seasonal_profile(&ratios, 7, 0).unwrap();
        for p in 0..7 {
            assert!(
                (prof.effect(p) - truth[p]).abs() < 0.02,
                "phase {p}: {} vs {}",
                prof.effect(p),
                truth[p]
            );
        }
        assert!(prof.effects().iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn anchoring_shifts_phases_not_values() {
        let truth = [0.1, 0.05, 0.0, 0.0, 0.0, -0.1, -0.05];
        // Same underlying cycle, window starting two days in.
        let ratios: Vec<f64> = (0..28).map(|i| truth[(2 + i) % 7]).collect();
        let prof = estimate_seasonal_profile(&ratios, 7, 2).unwrap();
        for p in 0..7 {
            assert!((prof.effect(p) - truth[p]).abs() < 1e-9, "phase {p}");
        }
    }

    #[test]
    fn weekly_data_is_passthrough() {
        let prof = estimate_seasonal_profile(&[0.3, -0.2, 0.4], 1, 0).unwrap();
        assert!(prof.is_zero());
        assert_eq!(prof.period(), 1);
    }

    #[test]
    fn needs_two_full_periods() {
        let short = vec![0.0; 13];
        assert!(estimate_seasonal_profile(&short, 7, 0).is_err());
        let enough = vec![0.0; 14];
        assert!(estimate_seasonal_profile(&enough, 7, 0).is_ok());
    }

    #[test]
    fn geometric_mean_is_preserved_over_whole_periods() {
        let truth = [0.08, -0.03, 0.02, -0.01, 0.04, -0.06, -0.04];
        let prof = SeasonalProfile::new(truth.to_vec()).unwrap();
        let raw: Vec<f64> = (0..21).map(|i| 10.0 + i as f64).collect();
        let phases: Vec<usize> = (0..21).map(|i| i % 7).collect();
        let out = adjust_values(&raw, &prof, &phases).unwrap();
        let log_before: f64 = raw.iter().map(|v| v.ln()).sum();
        let log_after: f64 = out.iter().map(|v| v.ln()).sum();
        assert!((log_before - log_after).abs() < 1e-9);
    }
}
