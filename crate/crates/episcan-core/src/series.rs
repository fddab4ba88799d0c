//! Count series and the rolling-mean exposure derived from them.
//!
//! The exposure `I_t` is the average of the previous `min(d, t−1)` counts,
//! a proxy for the pool of recently infectious cases. It is strictly causal:
//! `I_t` depends only on counts before `t`, so the first index has no
//! exposure at all and is stored as NaN.

use crate::error::{Error, Result};
use chrono::{Datelike, NaiveDate};
use serde::Serialize;

/// Smallest exposure used as a Poisson rate; keeps extinct stretches alive.
pub const EXPOSURE_FLOOR: f64 = 0.5;

/// A non-negative count series at a fixed cadence, optionally dated.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservationSeries {
    counts: Vec<u64>,
    dates: Option<Vec<NaiveDate>>,
    period_days: u32,
}

impl ObservationSeries {
    /// Undated series; `period_days` is the observation cadence in days
    /// (1 = daily, 7 = weekly).
    pub fn new(counts: Vec<u64>, period_days: u32) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyInput { what: "observation series" });
        }
        if period_days == 0 {
            return Err(Error::InvalidConfig {
                field: "period_days",
                reason: "cadence must be at least one day".into(),
            });
        }
        Ok(Self { counts, dates: None, period_days })
    }

    pub fn daily(counts: Vec<u64>) -> Result<Self> {
        Self::new(counts, 1)
    }

    /// Dated series; dates must be strictly increasing and gap-free at the
    /// declared cadence.
    pub fn with_dates(counts: Vec<u64>, dates: Vec<NaiveDate>, period_days: u32) -> Result<Self> {
        let mut s = Self::new(counts, period_days)?;
        if dates.len() != s.counts.len() {
            return Err(Error::LengthMismatch { left: s.counts.len(), right: dates.len() });
        }
        for w in dates.windows(2) {
            let gap = (w[1] - w[0]).num_days();
            if gap != i64::from(period_days) {
                return Err(Error::InvalidDates {
                    reason: format!(
                        "expected {period_days}-day spacing, found {gap} days between {} and {}",
                        w[0], w[1]
                    ),
                });
            }
        }
        s.dates = Some(dates);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn period_days(&self) -> u32 {
        self.period_days
    }

    /// Length of the within-period cycle: 7 phases for daily data, otherwise
    /// 1 (no cycle to adjust for).
    pub fn seasonal_period(&self) -> usize {
        if self.period_days == 1 {
            7
        } else {
            1
        }
    }

    /// Phase of observation `i` (0-based) within the seasonal cycle.
    ///
    /// Dated daily series anchor phases to the weekday (Monday = 0) so that
    /// a profile estimated on one window applies to any other; undated series
    /// use the index itself.
    pub fn phase(&self, i: usize) -> usize {
        let period = self.seasonal_period();
        if period == 1 {
            return 0;
        }
        match &self.dates {
            Some(dates) => dates[i].weekday().num_days_from_monday() as usize,
            None => i % period,
        }
    }
}

/// Rolling-mean exposure aligned with an observation series.
#[derive(Clone, Debug)]
pub struct ExposureSeries {
    raw: Vec<f64>,
    adjusted: Vec<f64>,
    d: usize,
}

impl ExposureSeries {
    pub(crate) fn from_parts(raw: Vec<f64>, adjusted: Vec<f64>, d: usize) -> Self {
        debug_assert_eq!(raw.len(), adjusted.len());
        Self { raw, adjusted, d }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Window length the rolling mean was computed with.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Raw exposures; index 0 is NaN because nothing precedes it.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Seasonally adjusted exposures; equal to `raw` until a profile is
    /// applied.
    pub fn adjusted(&self) -> &[f64] {
        &self.adjusted
    }

    /// First index with a defined exposure.
    pub fn first_defined(&self) -> usize {
        1
    }

    pub fn raw_at(&self, i: usize) -> Result<f64> {
        let v = self.raw[i];
        if v.is_nan() {
            return Err(Error::ExposureUnavailable { t: i + 1 });
        }
        Ok(v)
    }
}

/// Rolling mean of the previous `min(d, t−1)` counts at every index.
///
/// The divisor shrinks near the start so early exposures average whatever
/// history exists; index 0 has none and comes back NaN.
pub fn infectious_pool(obs: &ObservationSeries, d: usize) -> Result<ExposureSeries> {
    if d == 0 {
        return Err(Error::InvalidConfig {
            field: "d",
            reason: "rolling window must have positive length".into(),
        });
    }
    let counts = obs.counts();
    if counts.len() < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: counts.len() });
    }
    let mut raw = Vec::with_capacity(counts.len());
    raw.push(f64::NAN);
    let mut window_sum = 0.0f64;
    for i in 1..counts.len() {
        window_sum += counts[i - 1] as f64;
        if i > d {
            window_sum -= counts[i - 1 - d] as f64;
        }
        let width = i.min(d) as f64;
        raw.push(window_sum / width);
    }
    let adjusted = raw.clone();
    Ok(ExposureSeries::from_parts(raw, adjusted, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(counts: &[u64]) -> ObservationSeries {
        ObservationSeries::daily(counts.to_vec()).unwrap()
    }

    #[test]
    fn short_history_uses_what_exists() {
        let exp = infectious_pool(&series(&[10, 12, 8]), 7).unwrap();
        assert!(exp.raw()[0].is_nan());
        assert_eq!(exp.raw()[1], 10.0);
        assert_eq!(exp.raw()[2], 11.0);
    }

    #[test]
    fn window_slides_once_full() {
        let exp = infectious_pool(&series(&[5, 0, 0, 0]), 2).unwrap();
        assert!(exp.raw()[0].is_nan());
        assert_eq!(exp.raw()[1], 5.0);
        assert_eq!(exp.raw()[2], 2.5);
        assert_eq!(exp.raw()[3], 0.0);
    }

    #[test]
    fn exposure_is_strictly_causal() {
        let base: Vec<u64> = vec![3, 1, 4, 1, 5, 9, 2, 6, 5, 3];
        let exp_base = infectious_pool(&series(&base), 3).unwrap();
        for t in 1..base.len() {
            let mut bumped = base.clone();
            for v in bumped.iter_mut().skip(t) {
                *v += 100;
            }
            let exp_bumped = infectious_pool(&series(&bumped), 3).unwrap();
            assert_eq!(exp_base.raw()[t], exp_bumped.raw()[t], "t = {t}");
        }
    }

    #[test]
    fn adjusted_starts_equal_to_raw() {
        let exp = infectious_pool(&series(&[1, 2, 3, 4]), 2).unwrap();
        for i in 1..exp.len() {
            assert_eq!(exp.raw()[i], exp.adjusted()[i]);
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(infectious_pool(&series(&[1, 2]), 0).is_err());
        assert!(infectious_pool(&series(&[5]), 3).is_err());
        assert!(ObservationSeries::daily(vec![]).is_err());
    }

    #[test]
    fn dated_series_validates_spacing() {
        let d0 = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..4).map(|i| d0 + chrono::Days::new(i)).collect();
        let ok = ObservationSeries::with_dates(vec![1, 2, 3, 4], dates.clone(), 1);
        assert!(ok.is_ok());
        let mut gappy = dates;
        gappy[3] = d0 + chrono::Days::new(5);
        assert!(ObservationSeries::with_dates(vec![1, 2, 3, 4], gappy, 1).is_err());
    }

    #[test]
    fn weekday_anchors_phase_for_dated_series() {
        // 2021-03-01 is a Monday.
        let d0 = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..8).map(|i| d0 + chrono::Days::new(i)).collect();
        let s = ObservationSeries::with_dates(vec![1; 8], dates, 1).unwrap();
        assert_eq!(s.phase(0), 0);
        assert_eq!(s.phase(6), 6);
        assert_eq!(s.phase(7), 0);
        let undated = ObservationSeries::daily(vec![1; 8]).unwrap();
        assert_eq!(undated.phase(7), 0);
        assert_eq!(undated.phase(3), 3);
    }
}
