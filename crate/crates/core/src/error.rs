use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A session log violated one or more schema invariants.
    #[error("invalid session log `{team_id}`: {summary}")]
    InvalidLog { team_id: String, summary: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
