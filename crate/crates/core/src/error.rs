use thiserror::Error;

use crate::vi::PressureField;

/// Errors raised by the geometry, solver, dynamics and steady-state layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid too coarse: need at least 3 interior nodes per axis, got {nx}x{ny}")]
    TooCoarse { nx: usize, ny: usize },

    #[error("point ({x1}, {x2}) lies outside the domain")]
    OutOfDomain { x1: f64, x2: f64 },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("contact box leaves the domain: {0}")]
    BoxOutsideDomain(String),

    #[error("operation not supported for the {0} shape")]
    UnsupportedShape(&'static str),

    #[error("clearance must be positive, got {0}")]
    NonPositiveClearance(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("solver did not converge in {iterations} iterations (update {update:.3e}, residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        update: f64,
        residual: f64,
        last: Box<PressureField>,
    },

    #[error("no sign-changing bracket found after {expansions} expansions (last interval [{lo}, {hi}])")]
    BracketFailure { expansions: usize, lo: f64, hi: f64 },

    #[error("inadmissible shape: {0}")]
    InadmissibleShape(String),

    #[error("system has {0} unknowns; enumeration is limited to 16")]
    TooLarge(usize),

    #[error("no complementary solution found by enumeration")]
    NoSolution,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
