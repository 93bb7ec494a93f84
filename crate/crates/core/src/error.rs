//! Error taxonomy shared by every module in the crate.
//!
//! Variants are grouped by origin: data-contract violations (bad shapes,
//! degenerate inputs) and numeric failures (non-PD matrices, separation).
//! Callers that need to distinguish the two classes can use
//! [`Error::is_data_error`].

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Covariance matrix is not positive definite even after the jitter
    /// escalation ladder.
    #[error("matrix not positive definite after jitter escalation")]
    NotPositiveDefinite,

    /// Scalar argument outside the mathematical domain of the operation.
    #[error("argument {value} outside domain {domain}")]
    DomainError { value: f64, domain: &'static str },

    /// Two inputs that must agree in dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Norm parameter outside its admissible range (p >= 1, 1 <= k <= d).
    #[error("invalid norm parameter: {reason}")]
    InvalidNorm { reason: &'static str },

    /// Outcome vector is constant, so standardization is undefined.
    #[error("degenerate outcome: zero variance")]
    DegenerateOutcome,

    /// Covariate column with zero variance.
    #[error("degenerate covariate: column {column} has zero variance")]
    DegenerateCovariate { column: usize },

    /// A per-coordinate variance needed for standardization is not positive.
    #[error("degenerate variance: coordinate {coordinate}")]
    DegenerateVariance { coordinate: usize },

    /// Empty input where at least one element is required.
    #[error("empty input")]
    EmptyInput,

    /// A p-value sits on a pole of the tangent transform.
    #[error("p-value {value} is a pole of the tangent transform")]
    PoleInput { value: f64 },

    /// A sampling stratum contains no fully observed record.
    #[error("stratum {stratum} has no record with delta = 1")]
    EmptyStratum { stratum: usize },

    /// Logistic fit diverged (coefficient norm exceeded the separation bound).
    #[error("logistic fit separated: coefficient norm exceeded bound")]
    Separation,

    /// Outer regression smoother produced a value unusable under the log link.
    #[error("smoother produced a non-positive or non-finite value at point {point}")]
    NonPositiveSmoother { point: usize },

    /// Too few observations for the requested operation.
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Configuration value outside its contract.
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: &'static str },
}

impl Error {
    /// True for violations of the data contract (caller-supplied inputs),
    /// false for numeric failures discovered during computation.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::NotPositiveDefinite | Error::Separation)
    }
}
