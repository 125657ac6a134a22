use thiserror::Error;

/// Errors raised by the bound computations and the verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("malformed distribution: {0}")]
    InvalidSpec(String),

    /// A bound's hypothesis does not hold for the supplied inputs.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("support explosion: {size} outcomes exceed the limit of {limit}")]
    SupportExplosion { size: u64, limit: u64 },

    #[error("series tolerance {eps} not reachable within {max_terms} terms")]
    TruncationBudget { eps: f64, max_terms: usize },

    #[error("quadrature did not converge on [{lo}, {hi}] (estimate {estimate}, error {error})")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
    },

    #[error("could not bracket a minimum: {0}")]
    Bracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}
