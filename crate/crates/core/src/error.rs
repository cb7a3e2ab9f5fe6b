use std::fmt;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed keypoint export, dataset file or checkpoint.
    #[error("parse error: {context}: {message}")]
    Parse { context: String, message: String },

    /// Input violates a documented constraint (e.g. more than one person in a frame).
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// A clip ended up with no frames.
    #[error("clip `{0}` has no frames")]
    EmptyClip(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    /// A forward or backward pass produced NaN or infinity.
    #[error("numerical fault in {0}")]
    NumericalFault(String),

    #[error("batch has no valid positions for normalization")]
    DegenerateBatch,

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(context: impl fmt::Display, message: impl fmt::Display) -> Self {
        Error::Parse {
            context: context.to_string(),
            message: message.to_string(),
        }
    }

    /// Errors caused by bad user input rather than a runtime fault.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NumericalFault(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
