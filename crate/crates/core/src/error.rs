use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record could not be decoded. `line` is 1-based.
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    /// A decoded value broke a domain invariant.
    #[error("{}invariant violated for {field}: {message}", fmt_line(*.line))]
    Invariant {
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn fmt_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}: "),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            line: None,
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a 1-based line number to an invariant error that lacks one.
    pub(crate) fn at_line(self, at: usize) -> Self {
        match self {
            Error::Invariant {
                line: None,
                field,
                message,
            } => Error::Invariant {
                line: Some(at),
                field,
                message,
            },
            other => other,
        }
    }

    /// Process exit code: 2 for invariant violations, 1 for every other input error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant { .. } => 2,
            _ => 1,
        }
    }
}
