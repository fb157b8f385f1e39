use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("p_max too small: ratio still increasing at p_max = {p_max} (alpha = {alpha})")]
    PMaxTooSmall { alpha: u8, p_max: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("expectation diverges: {0}")]
    Divergent(String),

    #[error("lemma hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration cap exceeded: {size} points > cap {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("expectation budget too small: half-width {half_width} exceeds {limit}")]
    ExpectationBudget { half_width: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
