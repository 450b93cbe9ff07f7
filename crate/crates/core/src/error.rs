use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the valid domain ({bound})")]
    Domain {
        what: &'static str,
        value: f64,
        bound: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("record needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("sample times must be strictly increasing (index {index})")]
    NonMonotoneTime { index: usize },

    #[error("no climb segment of at least {min_len} samples")]
    NoClimb { min_len: usize },

    #[error("flight rejected: {0}")]
    FlightRejected(RejectReason),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("column {0} has zero variance")]
    ZeroVariance(String),

    #[error("unknown registration '{0}'")]
    UnknownRegistration(String),

    #[error("linear system is singular")]
    Singular,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("stall: required lift coefficient {cl:.3} exceeds maximum {cl_max:.3} at t = {t:.1} s")]
    Stall { cl: f64, cl_max: f64, t: f64 },

    #[error("duration limit {limit} s reached at altitude {altitude:.0} m before target")]
    DurationLimit { limit: f64, altitude: f64 },

    #[error("rolling sample: |psi| = {psi:.4} rad exceeds {threshold} rad")]
    Rolling { psi: f64, threshold: f64 },

    #[error("need at least {min} flights, got {got}")]
    TooFewFlights { got: usize, min: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("model bundle: {0}")]
    Bundle(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Why `clean_mass_channels` gave up on a flight.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RejectReason {
    SumFluctuation,
    TooFewSamples,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::SumFluctuation => f.write_str("sum-fluctuation ≥ L"),
            RejectReason::TooFewSamples => f.write_str("too few samples after cleaning"),
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::Divergence { .. } | Error::Singular | Error::Stall { .. } => {
                ErrorCategory::Numeric
            }
            Error::DurationLimit { .. } => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }
}
