use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("featurizer `{name}` failed: {source}")]
    Featurizer {
        name: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value in `{variable}` at iteration {iteration}")]
    NonFinite {
        variable: &'static str,
        iteration: usize,
    },

    #[error("linear algebra: {0}")]
    LinearAlgebra(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable kind tag used in JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Geometry(_) => "geometry",
            Error::Featurizer { .. } => "featurizer",
            Error::CgNotConverged { .. } => "cg_not_converged",
            Error::NonFinite { .. } => "non_finite",
            Error::LinearAlgebra(_) => "linear_algebra",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
