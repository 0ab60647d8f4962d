use thiserror::Error;

/// Errors raised by path construction, metric evaluation, sampling and quantization.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid step function: {0}")]
    InvalidPath(String),

    #[error("time {t} outside the horizon [0, {horizon}]")]
    OutOfDomain { t: f64, horizon: f64 },

    #[error("horizon mismatch: {0} vs {1}")]
    HorizonMismatch(f64, f64),

    #[error("drift mismatch: {0} vs {1}")]
    DriftMismatch(f64, f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("brute-force oracle limited to {limit} jumps in total, got {got}")]
    TooManyJumps { limit: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("lower-bound curve not applicable at eps = {eps}: m_eps = {m_eps} <= 0")]
    CurveNotApplicable { eps: f64, m_eps: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("degenerate regression: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
