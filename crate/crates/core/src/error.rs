use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad caller-supplied data: empty images, gaze outside the raster,
    /// mismatched frame sizes.
    #[error("invalid input: {0}")]
    Input(String),

    /// Inconsistent or physically meaningless configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A file parsed but violated its format contract.
    #[error("{}{}: {msg}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        path: Option<PathBuf>,
        line: Option<usize>,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line: None,
            msg: msg.into(),
        }
    }

    pub fn format_at(path: Option<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path,
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for anything the user can fix,
    /// 1 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 1,
            _ => 2,
        }
    }
}
