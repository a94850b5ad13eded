//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by sampling, estimation, asymptotic-covariance and I/O routines.
#[derive(Debug, Error)]
pub enum CovestError {
    /// A sampling scheme or series without observations.
    #[error("sampling scheme is empty")]
    EmptyScheme,

    /// Observation times that are not strictly increasing.
    #[error("observation times must be strictly increasing (violated at index {index})")]
    NotIncreasing { index: usize },

    /// An observation time outside the horizon `[0, T]`.
    #[error("observation time {time} lies outside [0, {horizon}]")]
    OutOfHorizon { time: f64, horizon: f64 },

    /// A non-positive or non-finite horizon.
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),

    /// Previous-tick interpolation requested before the first observation.
    #[error("no observation at or before time {0}")]
    NoPreviousTick(f64),

    /// Next-tick interpolation requested after the last observation.
    #[error("no observation at or after time {0}")]
    NoNextTick(f64),

    /// Schemes that should share a horizon do not.
    #[error("sampling schemes have different horizons ({0} vs {1})")]
    HorizonMismatch(f64, f64),

    /// Not enough observations, refresh times or bins for the requested operation.
    #[error("{what}: need at least {required}, got {actual}")]
    TooFew {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    /// An argument outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A synchronous estimator was applied to series observed at different times.
    #[error(
        "series are not observed synchronously; use hayashi_yoshida or generalized_multiscale"
    )]
    NotSynchronous,

    /// A kernel that violates the side conditions required for weight generation.
    #[error("kernel side condition violated: {0}")]
    KernelCondition(String),

    /// A kernel name that is not recognised.
    #[error("unknown kernel '{0}' (expected cubic, parzen or th<r>)")]
    UnknownKernel(String),

    /// A matrix index outside the matrix dimension.
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    /// A matrix that is not symmetric positive semidefinite.
    #[error("matrix is not symmetric positive semidefinite: {0}")]
    NotPsd(String),

    /// Standardisation attempted with a non-positive asymptotic variance.
    #[error("asymptotic variance must be strictly positive, got {0}")]
    NonPositiveAvar(f64),

    /// The requested method cannot be applied to the supplied data.
    #[error("method '{method}' not applicable: {reason}")]
    MethodMismatch { method: String, reason: String },

    /// Malformed input file content.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV decoding failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// JSON encoding failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CovestError>;
