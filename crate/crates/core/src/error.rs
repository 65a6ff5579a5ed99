use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the similarity toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("matrix too large: {n} rows exceeds the cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("manifest schema error: {0}")]
    SchemaError(String),
    #[error("layer {layer} has {got} rows, expected {expected}")]
    RowCountMismatch { layer: String, expected: usize, got: usize },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("eigensolver did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("singular design: x'x = 0")]
    SingularDesign,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("degenerate matrix: every column is constant")]
    DegenerateMatrix,
    #[error("operation requires a preprocessed matrix")]
    WrongState,
    #[error("confounder RSM has (near) zero norm")]
    SingularConfounder,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("RSM kind mismatch")]
    KindMismatch,
    #[error("matrix has no positive spectrum to keep")]
    NoPositiveSpectrum,
    #[error("need at least {needed} examples, got {got}")]
    TooFewExamples { needed: usize, got: usize },
    #[error("missing score for key {0:?}")]
    MissingScore(String),
    #[error("score tables have different key sets")]
    KeyMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Whether the failure comes from the filesystem rather than bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::MissingFile(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
