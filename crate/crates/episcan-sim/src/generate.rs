//! Synthetic epidemic generation: a hidden three-state chain modulating a
//! self-exciting Poisson count process.

use crate::config::{stationary_of, SimConfig};
use crate::error::{Result, SimError};
use episcan_core::{ObservationSeries, EXPOSURE_FLOOR};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

/// Intensities at or above this are treated as numeric overflow: beyond it,
/// consecutive f64 integers start to be skipped and count arithmetic would
/// silently lose accuracy. No plausible scenario gets anywhere close.
const MAX_INTENSITY: f64 = 1e15;

/// Ground truth for one generated epidemic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTruth {
    /// Hidden state per observation, 1-based values in `{1, 2, 3}` (warm-up
    /// days are recorded as the stationary state 2). Same length and
    /// indexing as the generated series.
    pub theta: Vec<u8>,
    /// Rejected time indices (1-based) per evaluated method, in the order of
    /// [`crate::metrics::METHOD_NAMES`]. Empty until a pipeline run fills it.
    pub rejections: Vec<Vec<usize>>,
}

impl RunTruth {
    pub fn new(theta: Vec<u8>) -> Self {
        Self { theta, rejections: Vec::new() }
    }

    /// Is 1-based time `t` a true alternative (increasing regime)?
    pub fn is_alt(&self, t: usize) -> bool {
        self.theta[t - 1] == 3
    }
}

/// Draw from a discrete distribution given by `probs` (assumed to sum to 1).
fn draw_categorical(rng: &mut ChaCha8Rng, probs: &[f64; 3]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (s, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    2 // u landed in the last state's roundoff sliver
}

/// Generate one synthetic epidemic.
///
/// Layout per [`SimConfig`]: `d` warm-up days with counts pinned at
/// `seed_count`, then `burn_in + t_total` stochastic days. Each stochastic
/// day draws the hidden state (the first from `start_state` or the
/// stationary distribution of `a`, later ones from the transition row), then
/// draws the count from Poisson with intensity
///
/// ```text
/// gamma[state] · max(pool, floor) · exp(weekly effect of the weekday)
/// ```
///
/// where `pool` is the rolling mean of the previous `min(d, t−1)` counts —
/// computed with exactly the arithmetic of
/// [`episcan_core::infectious_pool`], so the analysis sees the same exposure
/// the generator used — and `floor` is the shared exposure floor that lets
/// an extinct epidemic re-ignite.
///
/// `stream` selects an independent substream of the generator seeded by
/// `master_seed` (counter-mode splitting); replications use their index,
/// standalone callers pass 0. The same `(config, master_seed, stream)`
/// always reproduces the same series bit for bit.
pub fn generate_series(
    cfg: &SimConfig,
    master_seed: u64,
    stream: u64,
) -> Result<(ObservationSeries, RunTruth)> {
    cfg.validate()?;
    let d = cfg.d;
    let n = cfg.series_len();

    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);

    let mut state: usize = match cfg.start_state {
        Some(s) => usize::from(s) - 1,
        None => draw_categorical(&mut rng, &stationary_of(&cfg.a)?),
    };

    let mut counts: Vec<u64> = vec![cfg.seed_count; d];
    let mut theta: Vec<u8> = vec![2; d];
    let mut window_sum = 0.0f64;

    for i in 1..n {
        // Rolling-sum update in the same order as `infectious_pool`.
        window_sum += counts[i - 1] as f64;
        if i > d {
            window_sum -= counts[i - 1 - d] as f64;
        }
        if i < d {
            continue; // warm-up day, count already pinned
        }
        let pool = window_sum / i.min(d) as f64;

        if i > d {
            state = draw_categorical(&mut rng, &cfg.a[state]);
        }
        let effect = cfg.seasonal.map_or(0.0, |s| s[i % s.len()]);
        let mean = cfg.gamma[state] * pool.max(EXPOSURE_FLOOR) * effect.exp();
        if !(mean.is_finite() && mean < MAX_INTENSITY) {
            return Err(SimError::IntensityOverflow { t: i + 1 });
        }
        let draw = Poisson::new(mean)
            .map_err(|_| SimError::IntensityOverflow { t: i + 1 })?
            .sample(&mut rng);
        counts.push(draw as u64);
        theta.push(state as u8 + 1);
    }

    let obs = ObservationSeries::daily(counts)?;
    Ok((obs, RunTruth::new(theta)))
}
