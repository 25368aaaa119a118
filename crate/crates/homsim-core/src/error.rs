//! Crate-wide error type and exit-code categories.

use thiserror::Error;

use crate::grid::GridError;
use crate::tls::TlsError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tls(#[from] TlsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("grids do not match: {0}")]
    GridMismatch(String),
    #[error("arrival-time delay {delta_tau} outside supported range (|delay| <= {max})")]
    DelayOutOfRange { delta_tau: f64, max: f64 },
    #[error("normalization denominator is zero")]
    ZeroNormalization,
    #[error("no sign change bracketed on '{axis}' between {lo} and {hi}")]
    NoBracket { axis: String, lo: f64, hi: f64 },
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),
    #[error("beat period {period} unresolved by delay grid step {step}")]
    BeatsUnresolved { period: f64, step: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config parse failed: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code category: 2 invalid input, 3 numerical failure,
    /// 4 output/serialization failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Toml(_)
            | Error::Grid(_)
            | Error::GridMismatch(_)
            | Error::DelayOutOfRange { .. }
            | Error::Tls(TlsError::InvalidEmitter(_))
            | Error::Tls(TlsError::InvalidPulse(_))
            | Error::Tls(TlsError::InconsistentTimescales { .. }) => 2,
            Error::Tls(_)
            | Error::ZeroNormalization
            | Error::NoBracket { .. }
            | Error::DegenerateDistribution(_)
            | Error::BeatsUnresolved { .. } => 3,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 4,
        }
    }
}
