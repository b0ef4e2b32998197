use thiserror::Error;

/// Errors raised by the model, sampler, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),

    #[error("model state does not match the series: {0}")]
    StateMismatch(String),

    #[error("segment of {len} observations is too short for {m} frequencies (needs {needed})")]
    SegmentTooShort { len: usize, m: usize, needed: usize },

    #[error("count {value} outside truncation range [{min}, {max}]")]
    CountOutOfRange { value: usize, min: usize, max: usize },

    #[error("phase is undefined when both coefficients are zero")]
    UndefinedPhase,

    #[error("periodogram has no mass; fall back to a uniform frequency draw")]
    DegeneratePeriodogram,

    #[error("frequency {0} outside (0, 0.5)")]
    FrequencyOutOfRange(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sigma2 must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("infeasible initial state: {0}")]
    InfeasibleInit(String),

    #[error("invariant violated at iteration {iteration}: {reason}\nstate: {state}")]
    InvariantViolation {
        iteration: usize,
        reason: String,
        state: String,
    },

    #[error("no posterior samples with k = {0}")]
    NoSamplesForK(usize),

    #[error("no posterior samples match the requested conditioning")]
    NoMatchingSamples,

    #[error("empty sample set")]
    EmptySamples,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
