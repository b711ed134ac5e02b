use thiserror::Error;

/// Errors raised across the engine.
#[derive(Debug, Error)]
pub enum CfxError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parse error at line {line} (sample `{sample_id}`): {message}")]
    Parse {
        line: usize,
        sample_id: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CfxError> = std::result::Result<T, E>;

impl CfxError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        CfxError::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CfxError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
