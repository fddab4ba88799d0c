use thiserror::Error;

/// Error type shared by every fallible operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("exposure undefined at index {t}: no past observations to average")]
    ExposureUnavailable { t: usize },

    #[error("invalid Poisson rate {rate}: must be finite and positive")]
    InvalidRate { rate: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid p-value {value}: must lie in [0, 1]")]
    InvalidPValue { value: f64 },

    #[error("invalid model parameters: {reason}")]
    InvalidParams { reason: String },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid dates: {reason}")]
    InvalidDates { reason: String },

    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    #[error("EM log-likelihood decreased by {drop:.3e} at iteration {iteration}")]
    EmDiverged { iteration: usize, drop: f64 },

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
