use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("day unusable: {0}")]
    DayUnusable(String),

    #[error("cannot standardize: mean duration is zero")]
    CannotStandardize,

    #[error("degenerate abscissae: all x values are identical")]
    DegenerateAbscissae,

    #[error("variance bound violated at observation {index}")]
    VarianceBound { index: usize },

    #[error("non-finite log-likelihood at observation {index}")]
    NonFinite { index: usize },

    #[error("lag must be positive")]
    ZeroLag,

    #[error("series too short: need more than {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error comes from the numerics rather than from the data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::VarianceBound { .. }
                | Error::NonFinite { .. }
                | Error::Estimation(_)
                | Error::Linalg(_)
        )
    }
}
