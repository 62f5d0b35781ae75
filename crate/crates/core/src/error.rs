use thiserror::Error;

use crate::distributions::Family;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of a function or distribution.
    #[error("domain error in {context}: {detail}")]
    Domain {
        context: &'static str,
        detail: String,
    },

    /// An iterative evaluation did not converge.
    #[error("{0} failed to converge")]
    Convergence(&'static str),

    /// The integrand lacks an evaluator needed by the requested estimator.
    #[error("integrand has no {0} evaluator")]
    MissingEvaluator(&'static str),

    #[error("{0:?} has no reparameterization")]
    NotReparameterizable(Family),

    #[error("estimator requires {expected}, got {got:?}")]
    WrongFamily { expected: &'static str, got: Family },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid config: {0}")]
    Config(String),

    /// A NaN or infinity appeared in an experiment trace.
    #[error("non-finite value at iteration {iteration}: {detail}")]
    Numerical { iteration: usize, detail: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            context,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
