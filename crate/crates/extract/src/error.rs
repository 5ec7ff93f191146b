use thiserror::Error;

use crate::corpus::ExtractionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trace has {0} fixes, need at least 2")]
    InsufficientTrace(usize),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid fix: {0}")]
    InvalidFix(String),
    #[error("invalid way attributes: {0}")]
    InvalidAttributes(String),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed provider response: {0}")]
    Response(String),
    #[error("invalid provider config: {0}")]
    Config(String),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("no trace was extracted ({} failures)", .0.failures.len())]
    NoSuccesses(Box<ExtractionReport>),
    #[error(transparent)]
    Metadata(#[from] metasel::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
