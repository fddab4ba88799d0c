use thiserror::Error;

/// Error type for simulation and evaluation failures.
#[derive(Debug, Error)]
pub enum SimError {
    /// Any failure bubbling up from the analysis pipeline.
    #[error(transparent)]
    Core(#[from] episcan_core::Error),

    #[error("invalid simulation config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("transition matrix has no unique stationary distribution: {reason}")]
    DegenerateChain { reason: String },

    #[error("epidemic intensity overflowed numeric range at t={t}")]
    IntensityOverflow { t: usize },

    #[error("hidden state {value} at index {index} is outside {{1, 2, 3}}")]
    InvalidState { value: u8, index: usize },

    #[error("rejection at t={t} lies outside the test range {lo}..={hi}")]
    RejectionOutOfRange { t: usize, lo: usize, hi: usize },

    #[error("all {attempted} replications failed; last error: {last}")]
    AllRepsFailed { attempted: usize, last: String },
}

pub type Result<T> = std::result::Result<T, SimError>;
