use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few (or too many) items were supplied.
    #[error("arity error: {0}")]
    Arity(String),

    /// The sample set cannot identify the model parameters.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A requested (K, RMS-DS) pair cannot be realized by the tap layout.
    #[error("infeasible target: {constraint}")]
    Infeasible { constraint: String },

    #[error("synchronization failed: peak-to-secondary ratio {ratio:.3} below margin {margin:.3}")]
    SyncFailure { ratio: f64, margin: f64 },

    #[error("no sample exceeds the noise floor")]
    NoSignal,

    #[error("Rician K undefined: {0}")]
    UndefinedK(String),

    #[error("mean arrival angle undefined: zero resultant vector")]
    UndefinedMean,

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: byte {offset}: {message}", path.display())]
    HexParse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("config {}:{line}: {message}", path.display())]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn arity(msg: impl Into<String>) -> Self {
        Error::Arity(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code used in CLI error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "E_DOMAIN",
            Error::Arity(_) => "E_ARITY",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::Infeasible { .. } => "E_INFEASIBLE",
            Error::SyncFailure { .. } => "E_SYNC",
            Error::NoSignal => "E_NO_SIGNAL",
            Error::UndefinedK(_) => "E_UNDEFINED_K",
            Error::UndefinedMean => "E_UNDEFINED_MEAN",
            Error::Parse { .. } => "E_PARSE",
            Error::HexParse { .. } => "E_HEX_PARSE",
            Error::Config { .. } => "E_CONFIG",
            Error::Io { .. } => "E_IO",
            Error::Json(_) => "E_JSON",
        }
    }

    /// True for errors caused by invalid user input (CLI exit code 2);
    /// everything else is a computation failure (exit code 3).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Arity(_)
                | Error::Degenerate(_)
                | Error::Parse { .. }
                | Error::HexParse { .. }
                | Error::Config { .. }
                | Error::Io { .. }
                | Error::Json(_)
        )
    }

    pub fn location(&self) -> (Option<&std::path::Path>, Option<usize>) {
        match self {
            Error::Parse { path, line, .. } | Error::Config { path, line, .. } => {
                (Some(path.as_path()), Some(*line))
            }
            Error::HexParse { path, .. } | Error::Io { path, .. } => (Some(path.as_path()), None),
            _ => (None, None),
        }
    }
}
