use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("sample {sample_id}: total duration must be positive and finite")]
    DegenerateSample { sample_id: String },
    #[error("invalid sample {sample_id}: {reason}")]
    InvalidSample { sample_id: String, reason: String },
    #[error("cannot aggregate an empty subset")]
    EmptySubset,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("no cells left to compare after masking")]
    NoCells,
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("batch needs at least 2 samples, got {0}")]
    InsufficientBatch(usize),
    #[error("batch has zero weighted duration")]
    DegenerateBatch,
    #[error("training failed: {0}")]
    TrainingFailed(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid synthetic profile: {0}")]
    InvalidProfile(String),
    #[error("corpus of {n} samples exceeds the enumeration bound of {max}")]
    SizeLimit { n: usize, max: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
