//! Offline reference detector for benchmarking: it knows the true model
//! parameters and sees the whole evaluation window at once.

use crate::config::{stationary_of, SimConfig};
use crate::error::Result;
use episcan_core::seasonal::{adjust_values, estimate_seasonal_profile, log_intensity_ratio, SeasonalProfile};
use episcan_core::{adaptive_barrier, infectious_pool, posterior, HmmParams, ObservationSeries};

/// Rejections of the oracle detector, as 1-based time indices.
///
/// The oracle skips estimation entirely: it builds the posterior from the
/// true rates, transition matrix, and stationary initial distribution over
/// the *entire* evaluation window in one pass, then applies the adaptive
/// barrier once to the scored days (`h+1 ..= t_total` of the evaluation
/// window, the same set every online method is scored on). What it does
/// *not* know is the weekly pattern: when `adjust_seasonal` is set it
/// estimates the profile from the data like everyone else, and when unset it
/// suffers any unmodeled pattern like everyone else. That makes it an upper
/// bound on achievable detection under the configured adjustment, not an
/// omniscient answer key.
pub fn oracle_rejections(cfg: &SimConfig, obs: &ObservationSeries) -> Result<Vec<usize>> {
    let ctx = cfg.context_len();
    let n = obs.len();
    let exposure = infectious_pool(obs, cfg.d)?;
    let period = obs.seasonal_period();

    let profile = if cfg.adjust_seasonal && period > 1 {
        let ratios = log_intensity_ratio(&obs.counts()[1..], &exposure.raw()[1..])?;
        estimate_seasonal_profile(&ratios, period, obs.phase(1))?
    } else {
        SeasonalProfile::zero(period)
    };

    let phases: Vec<usize> = (ctx..n).map(|i| obs.phase(i)).collect();
    let adjusted = adjust_values(&exposure.raw()[ctx..], &profile, &phases)?;
    let params = HmmParams::new(stationary_of(&cfg.a)?, cfg.a, cfg.gamma)?;
    let tables = posterior(&params, &obs.counts()[ctx..], &adjusted)?;

    let t_eval = n - ctx;
    let lis: Vec<f64> = (cfg.h..t_eval).map(|p| tables.lis(p)).collect();
    let barrier = adaptive_barrier(&lis, cfg.alpha)?;
    Ok(lis
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l <= barrier)
        .map(|(k, _)| ctx + cfg.h + k + 1)
        .collect())
}
