use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("syntax error at byte offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("argument outside the accuracy envelope: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (last iterate {last})")]
    Convergence { iterations: usize, last: Complex64 },

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("condition is vacuous: {0}")]
    Vacuous(String),

    #[error("stagnation point at ({x}, {y})")]
    Stagnation { x: f64, y: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Eval(_)
                | Error::Domain(_)
                | Error::Convergence { .. }
                | Error::Singularity(_)
                | Error::Degenerate(_)
                | Error::Stagnation { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Config(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
