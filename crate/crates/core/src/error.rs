use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid meaning representation {input:?}: {message}")]
    InvalidMr { input: String, message: String },

    #[error("rating {0} outside the 1-6 scale")]
    RatingOutOfRange(f64),

    #[error("malformed instance: {0}")]
    MalformedInstance(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("not enough distinct MRs: {available} available, {required} required")]
    TooFewMrs { available: usize, required: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },

    #[error("backward from a non-scalar node of shape {0:?} requires a seed gradient")]
    NonScalarRoot(Vec<usize>),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("vocabulary hash mismatch: header says {expected}, tokens hash to {actual}")]
    VocabularyMismatch { expected: String, actual: String },

    #[error("synthetic instances are not allowed in {0}")]
    SyntheticInEvaluation(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for problems with user-supplied data or files, as opposed to
    /// internal invariant violations.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Shape(_) | Error::NonScalarRoot(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
