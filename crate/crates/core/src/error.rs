use thiserror::Error;

#[derive(Debug, Error)]
pub enum FtnsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FtnsError {
    /// Whether the failure came from user-supplied configuration or data rather than arithmetic.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            FtnsError::InvalidInput(_)
                | FtnsError::Config(_)
                | FtnsError::Unsupported(_)
                | FtnsError::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FtnsError>;

pub(crate) fn invalid(msg: impl Into<String>) -> FtnsError {
    FtnsError::InvalidInput(msg.into())
}
