use std::fmt;
use std::path::PathBuf;

use serde_json::{json, Value};

#[derive(Debug)]
pub enum CliError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Malformed input table; `row` counts data rows from 1.
    Ingest {
        path: PathBuf,
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },
    Config(String),
    Usage(String),
    Core(mapsieve::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn ingest(path: impl Into<PathBuf>, row: Option<usize>, column: Option<&str>, message: impl Into<String>) -> Self {
        Self::Ingest {
            path: path.into(),
            row,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Ingest { .. } => "ingest",
            Self::Config(_) => "config",
            Self::Usage(_) => "usage",
            Self::Core(_) => "computation",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config(_) => 2,
            _ => 1,
        }
    }

    /// JSON error record written to stderr.
    pub fn record(&self) -> Value {
        let mut err = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            Self::Io { path, .. } => err["path"] = json!(path),
            Self::Ingest { path, row, column, .. } => {
                err["path"] = json!(path);
                err["row"] = json!(row);
                err["column"] = json!(column);
            }
            Self::Core(e) => err["detail"] = json!(format!("{e:?}")),
            _ => {}
        }
        json!({ "error": err })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Ingest {
                path,
                row,
                column,
                message,
            } => {
                write!(f, "{}", path.display())?;
                if let Some(r) = row {
                    write!(f, ", row {r}")?;
                }
                if let Some(c) = column {
                    write!(f, ", column `{c}`")?;
                }
                write!(f, ": {message}")
            }
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Usage(m) => write!(f, "{m}"),
            Self::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mapsieve::Error> for CliError {
    fn from(e: mapsieve::Error) -> Self {
        match e {
            mapsieve::Error::Config(m) => Self::Config(m),
            other => Self::Core(other),
        }
    }
}
