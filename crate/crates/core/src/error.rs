use std::path::PathBuf;

/// Errors produced by every stage of the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("label sequence is empty")]
    EmptySequence,

    #[error("cannot split {ids} timelines into {k} folds")]
    InvalidFoldCount { k: usize, ids: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("duplicate record: {0}")]
    DuplicateRecord(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need {needed} eligible users, only {available} available")]
    InsufficientCandidates { needed: usize, available: usize },

    #[error("invalid class distribution: {0}")]
    InvalidDistribution(String),

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("timeline of {len} posts is too short for a history of {k}")]
    InsufficientHistory { len: usize, k: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("timeline {0} is covered by fewer than two annotators")]
    InsufficientAnnotators(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the content of input data rather than by
    /// how the toolkit was invoked.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidParameter(_) | Error::Config(_))
    }
}
