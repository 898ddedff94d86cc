use thiserror::Error;

/// Errors raised by the library. Every variant is a validation or numerical
/// failure that a caller can report and recover from.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("level {level} out of range 2..={j_max}")]
    LevelOutOfRange { level: u32, j_max: u32 },

    #[error("invalid coefficient array: {0}")]
    InvalidCoefficients(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("floating-point overflow: {0}")]
    Overflow(String),

    #[error("bisection did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
