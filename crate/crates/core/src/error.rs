use thiserror::Error;

/// Errors raised by the noise-budget library.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a value outside its valid domain.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// A quantity has no meaningful value for the given inputs.
    #[error("undefined: {0}")]
    Undefined(String),

    /// The requested Monte Carlo run exceeds the supported window count.
    #[error("too many coincidence windows: {windows:.3e} exceeds limit {limit:.1e}")]
    TooManyWindows { windows: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Require `value` to be finite and strictly positive.
pub(crate) fn require_positive(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

/// Require `value` to be finite and non-negative.
pub(crate) fn require_non_negative(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {value}")))
    }
}

pub(crate) fn require_finite(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(field, format!("must be finite, got {value}")))
    }
}
