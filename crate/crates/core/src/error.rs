//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("constraint {label}[{index}] evaluated to a non-finite value")]
    NonFiniteConstraint { label: String, index: usize },

    #[error("objective evaluated to a non-finite value")]
    NonFiniteObjective,

    #[error("dynamics produced a non-finite state at step {step}")]
    NonFiniteDynamics { step: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid knot set: {0}")]
    InvalidKnotSet(String),

    #[error("invalid segment: start index {start} must be below end index {end}")]
    InvalidSegment { start: usize, end: usize },

    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

pub type Result<T> = std::result::Result<T, Error>;
