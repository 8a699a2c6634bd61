use thiserror::Error;

/// Errors raised by model construction, filtering, simulation and MCMC.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch at {path}: {detail}")]
    ShapeMismatch { path: String, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mean-reversion rate must be strictly positive, got {0}")]
    NonpositiveAlpha(f64),

    #[error("diffusion coefficient must be nonnegative, got {0}")]
    NegativeDiffusion(f64),

    #[error("observation scale must be strictly positive, got {0}")]
    NonpositiveScale(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("count observation must be an integer, got {0}")]
    NonIntegerObservation(f64),

    #[error("count observation must be nonnegative, got {0}")]
    NegativeObservation(f64),

    #[error("binary observation must be 0 or 1, got {0}")]
    ObservationNotBinary(f64),

    #[error("observation is not finite: {0}")]
    NonfiniteObservation(f64),

    #[error("phase is undefined for the zero vector")]
    ZeroVector,

    #[error("event times must be strictly increasing: {next} follows {previous}")]
    NonincreasingEventTimes { previous: f64, next: f64 },

    #[error("the identity model has no observation distribution")]
    UnusableIdentity,

    #[error("operation {0} is not available for event-time (LGCP) models; use the LGCP filter step")]
    RequiresCumulativeHazard(&'static str),

    #[error("every particle weight is zero (log-weight -inf or NaN) at time {time}")]
    AllWeightsZero { time: f64 },

    #[error("time went backwards: {next} follows {previous}")]
    NonmonotoneTime { previous: f64, next: f64 },

    #[error("weights must be nonnegative and sum to 1, got sum {0}")]
    WeightSumInvalid(f64),

    #[error("chain is empty")]
    EmptyChain,

    #[error("variance must be strictly positive, got {0}")]
    NonpositiveVariance(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn shape(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// True for failures that stem from numerics during inference rather than
    /// from malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::AllWeightsZero { .. } | Error::NonpositiveVariance(_) | Error::WeightSumInvalid(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
