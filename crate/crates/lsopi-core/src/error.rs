//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Error`]. The CLI maps
//! error categories to process exit codes: input/parse problems exit with 2,
//! genericity failures (sampled data contradicting a symbolic rank) exit
//! with 3.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Text could not be parsed as an expression.
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    /// An identifier in an expression is not a declared state variable.
    #[error("unknown variable `{name}` at byte {position}")]
    UnknownVariable { name: String, position: usize },

    /// A denominator normalized to the zero polynomial.
    #[error("zero denominator in expression")]
    ZeroDenominator,

    /// Evaluation hit a vanishing denominator at the given point.
    #[error("expression undefined at sample point: {detail}")]
    NonGenericPoint { detail: String },

    /// Exponent outside the supported range.
    #[error("exponent out of range: {0}")]
    ExponentRange(i64),

    /// Mismatched dimensions (vector length, matrix shape, arity).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// System description failed validation (counts, names, input rank).
    #[error("invalid system description: {0}")]
    Validation(String),

    /// Sampled ranks kept disagreeing with the symbolic rank within budget.
    #[error("genericity failure: {0}")]
    Genericity(String),

    /// A claimed distribution inclusion does not hold.
    #[error("inclusion violation: {0}")]
    InclusionViolation(String),

    /// An internal invariant guaranteed by theory failed.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
