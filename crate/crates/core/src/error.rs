//! Error taxonomy shared by every module in the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a domain invariant (negative power, efficiency
    /// outside (0, 1], non-monotone frequency grid, ...). The field name is
    /// carried so front ends can point at the offending input.
    #[error("invalid input `{field}`: {message}")]
    InvalidInput { field: String, message: String },

    /// Inputs are individually valid but outside the regime in which the
    /// analytic model applies (e.g. backscatter power not small against the
    /// carrier).
    #[error("model validity: {0}")]
    ModelValidity(String),

    /// The requested operation exists but a different one covers this
    /// parameter regime (small-motion drive pushed to fringe wrapping, shelf
    /// model below the shelf threshold, ...).
    #[error("regime: {0}")]
    Regime(String),

    /// Sample rate too low to resolve the highest instantaneous fringe
    /// frequency of the requested drive.
    #[error("aliasing: sample rate {actual_hz} Hz below required {required_hz} Hz")]
    Undersampled { required_hz: f64, actual_hz: f64 },

    /// Driven motion does not exceed the background at the requested
    /// frequency, so the driven-to-background scaling is undefined.
    #[error(
        "insufficient excitation at {at_hz} Hz: driven {driven_asd} m/rtHz \
         not above background {background_asd} m/rtHz"
    )]
    InsufficientExcitation {
        at_hz: f64,
        driven_asd: f64,
        background_asd: f64,
    },

    /// Two spectra that must share a frequency grid do not.
    #[error("frequency grid mismatch: {0}")]
    GridMismatch(String),

    /// Malformed file content (CSV/JSON parse and schema problems).
    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
