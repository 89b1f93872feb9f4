use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input to a library call.
    #[error("invalid input: {0}")]
    Input(String),
    /// A configuration value failed validation; `key` names the offending field.
    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },
    /// A matrix failed a stochasticity or shape check.
    #[error("matrix `{matrix}` failed validation at {axis} {index}: {message}")]
    Matrix {
        matrix: &'static str,
        axis: &'static str,
        index: usize,
        message: String,
    },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the numerics (eigensolver, certification,
    /// divergence), as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::Certification(_))
    }
}
