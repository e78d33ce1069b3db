use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("provenance error: {0}")]
    Provenance(String),

    #[error("non-finite value produced by `{op}`{}", at.as_ref().map(|a| format!(" ({a})")).unwrap_or_default())]
    Numeric { op: String, at: Option<String> },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Any of the above, tagged with where in a larger run it happened.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn dimension(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn numeric(op: impl Into<String>) -> Self {
        Error::Numeric {
            op: op.into(),
            at: None,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a location (epoch, split, seed ...) to a numeric error; other kinds pass through.
    pub fn at(self, location: impl Into<String>) -> Self {
        match self {
            Error::Numeric { op, at: None } => Error::Numeric {
                op,
                at: Some(location.into()),
            },
            other => other,
        }
    }

    /// Prefix the error with a location such as `stage=train split=friction-interp seed=3`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with every context layer removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 2,
            Error::Dimension { .. } | Error::Data(_) | Error::Provenance(_) => 3,
            Error::Numeric { .. } => 4,
            Error::Io { .. } => 5,
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::Dimension { .. } => "dimension",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Provenance(_) => "provenance",
            Error::Numeric { .. } => "numeric",
            Error::Io { .. } => "io",
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }
}
