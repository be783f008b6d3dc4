use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected:?}, got {got:?}")]
    Dimension {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("agent kind `{0}` does not support this operation")]
    UnsupportedAgent(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: &[usize], got: &[usize]) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
