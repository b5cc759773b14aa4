use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Convergence,
    Config,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "solver did not converge after {iterations} iterations (final marginal residual {residual:.3e})"
    )]
    Convergence { iterations: usize, residual: f64 },

    #[error("composition error: {0}")]
    Composition(String),

    #[error("coverage error: categories never observed: {}", .0.join(", "))]
    Coverage(Vec<String>),

    #[error("unsupported problem size: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("report schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("time pair {t}: {source}")]
    AtTime {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Convergence { .. } => ErrorKind::Convergence,
            Error::Config(_) => ErrorKind::Config,
            Error::AtTime { source, .. } => source.kind(),
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn at_time(t: usize, source: Error) -> Self {
        Error::AtTime {
            t,
            source: Box::new(source),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
