//! Online detection of epidemic trend changes in count surveillance streams.
//!
//! The crate turns a daily (or weekly) case-count series into a stream of
//! tested hypotheses: at each time point, is the epidemic currently
//! *increasing*? Detection runs a rolling three-state Poisson hidden Markov
//! model — states for decreasing, stationary, and increasing transmission —
//! over an exposure-weighted window, and converts its posterior into a local
//! index of significance (LIS, the posterior probability that the trend is
//! *not* increasing). An adaptive barrier turns those indices into online
//! decisions with false discovery rate control; classical online p-value
//! procedures (LORD++, SAFFRON, ADDIS) run alongside for comparison.
//!
//! Layout:
//! - [`series`]: count series, rolling-mean exposures.
//! - [`seasonal`]: weekly multiplicative pattern estimation and removal.
//! - [`poisson`]: high-accuracy Poisson log-pmf and tail probabilities.
//! - [`hmm`]: the three-state model — forward/backward, EM, LIS.
//! - [`fdr`]: the adaptive barrier, decision rule, and decision log.
//! - [`baselines`]: LORD++ / SAFFRON / ADDIS state machines.
//! - [`analysis`]: the end-to-end rolling pipeline tying it all together.

pub mod analysis;
pub mod baselines;
pub mod error;
pub mod fdr;
pub mod hmm;
pub mod logprob;
pub mod poisson;
pub mod seasonal;
pub mod series;

pub use analysis::{run_sast_plus, AnalysisConfig};
pub use baselines::{run_addis, run_lord_pp, run_saffron, Addis, LordPlusPlus, Saffron};
pub use error::{Error, Result};
pub use fdr::{adaptive_barrier, sast_plus_decide, DecisionLog, DecisionRecord, Method};
pub use hmm::{compute_lis, fit_em, init_params, posterior, HmmParams, LisRecord};
pub use poisson::{poisson_log_pmf, poisson_p_value, poisson_upper_p, PValueConvention};
pub use seasonal::{estimate_seasonal_profile, SeasonalProfile};
pub use series::{infectious_pool, ExposureSeries, ObservationSeries, EXPOSURE_FLOOR};
