use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The conjugate has no closed form for this model; use the numeric route.
    #[error("no closed-form conjugate for this model")]
    NoClosedForm,

    #[error("numeric failure: non-finite log-MGF at lambda = {lambda:?}")]
    NumericFailure { lambda: Vec<f64> },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("could not generate a connected geometric graph after {attempts} attempts")]
    GenerationFailure { attempts: usize },

    #[error("matrix is not primitive: |lambda_2| = {modulus}")]
    NotPrimitive { modulus: f64 },

    #[error("insufficient data: {points} uncensored points, need at least {required}")]
    InsufficientData { points: usize, required: usize },

    #[error("weight-matrix projection infeasible: residual {residual:e}")]
    Infeasible { residual: f64 },

    #[error("{0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
