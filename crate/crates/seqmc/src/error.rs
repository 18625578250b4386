//! Crate-wide error type.

use crate::Scalar;

/// Errors produced by any operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Every log-weight in the ensemble is negative infinity after a weight
    /// update; the filter cannot continue. `step` is the zero-based index of
    /// the observation being processed.
    #[error("weight collapse at step {step}: all log-weights are -inf")]
    WeightCollapse { step: usize },

    /// A weight vector contains no finite entry, so normalization and
    /// log-sum-exp are undefined.
    #[error("all weights degenerate: no finite log-weight present")]
    AllWeightsDegenerate,

    /// A model evaluation produced a NaN log-weight; NaN is never stored.
    #[error("NaN log-weight for particle {index} at step {step}")]
    NanLogWeight { index: usize, step: usize },

    /// A probability vector handed to a resampler was not usable.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// Input lengths or matrix shapes disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A scale parameter (standard deviation) was zero, negative, or NaN.
    #[error("invalid scale: standard deviation must be positive, got {0}")]
    InvalidScale(Scalar),

    /// A covariance matrix was expected to be symmetric positive definite.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Model parameters failed validation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The innovation covariance in a Kalman update could not be factorized.
    #[error("singular innovation covariance at step {step}")]
    SingularInnovationCovariance { step: usize },

    /// A discrete forward update gave the observation zero probability under
    /// every state, so the posterior is undefined.
    #[error("zero-likelihood observation (symbol {symbol}) at step {step}")]
    ZeroLikelihoodObservation { symbol: usize, step: usize },

    /// An emission symbol index was out of range for the model.
    #[error("invalid emission symbol {symbol}: model has {n_symbols} symbols")]
    InvalidSymbol { symbol: usize, n_symbols: usize },

    /// A quantity that only exists after the first filtering step was
    /// requested from a freshly constructed filter.
    #[error("no filtering step has been taken yet")]
    NotYetFiltered,

    /// A file could not be opened.
    #[error("cannot open {path}: {reason}")]
    FileNotFound { path: String, reason: String },

    /// A CSV token could not be parsed as a finite number.
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    /// An underlying I/O operation failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
