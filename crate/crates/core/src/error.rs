use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A callback or argument has the wrong shape.
    #[error("dimension mismatch in `{field}`: expected {expected}, got {actual}")]
    Dimension { field: String, expected: String, actual: String },

    /// A required input is absent (e.g. the jerk of a jet).
    #[error("missing `{0}`")]
    Missing(&'static str),

    #[error("Gram matrix is singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("constraint matrix is singular (condition estimate {condition:e}); constraints are not purely second-class here")]
    SecondClass { condition: f64 },

    #[error("projection did not converge after {iterations} iterations (residual {residual:e})")]
    Projection { iterations: usize, residual: f64 },

    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn dim(field: &str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension { field: field.to_string(), expected: expected.to_string(), actual: actual.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
