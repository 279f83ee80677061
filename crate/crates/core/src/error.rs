use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    /// Malformed input data, located by file line and/or field.
    #[error("{location}: {message}")]
    Validation { location: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("propensity fit did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    Convergence { iterations: usize, grad_norm: f64 },

    #[error("singular normal equations for treatment arm `{arm}`")]
    SingularSystem { arm: String },

    #[error("no candidate pattern meets the support threshold")]
    EmptyCandidates,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for numerical failures and size refusals, as opposed to bad input.
    pub fn is_numerical_or_size(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::SingularSystem { .. } | Error::TooLarge(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
