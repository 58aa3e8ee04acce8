use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A state component became NaN/±∞ or exceeded the blow-up threshold.
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    /// An oracle cannot perform the requested operation for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A fixed-point iteration exceeded its iteration guard.
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    /// The verified Lyapunov descent inequality failed.
    #[error("descent violated at t = {t}: {lhs} > {rhs}")]
    DescentViolation { t: f64, lhs: f64, rhs: f64 },

    /// The epigraph envelope reached the top of the y-range.
    #[error("value cap too small: envelope touches the top of the y-range at x = {x:?}")]
    CapTooSmall { x: Vec<f64> },

    /// Parameters or states outside the closed-form evaluator's domain.
    #[error("parameter domain: {0}")]
    ParamDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
