use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the scoring and auditing primitives.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid score scale [{min}, {max}]: min must be below max")]
    InvalidScale { min: i32, max: i32 },
    #[error("score {score} outside scale [{min}, {max}]")]
    ScoreOutOfScale { score: i32, min: i32, max: i32 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("attribute {attribute:?} has fewer than two known groups")]
    DegeneratePartition { attribute: String },
    #[error("essay {0:?} has no group assignment")]
    MissingGroup(String),
    #[error("essay {0:?} has no matching corpus record")]
    MissingEssay(String),
    #[error("kappa {0} is above 1")]
    KappaDomain(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("system has {rows} rows but {cols} columns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("text has no words or sentences")]
    EmptyText,
    #[error("vocabulary is empty after document-frequency filtering")]
    EmptyVocabulary,
    #[error("could not find a score in response: {0:?}")]
    Parse(String),
    #[error("no usable demographic attributes")]
    NoUsableAttributes,
    #[error("degenerate split: {0}")]
    DegenerateSplit(&'static str),
    #[error("every feature has zero perturbation scale")]
    ZeroPerturbation,
    #[error("essay {essay_id:?}: {source}")]
    Essay { essay_id: String, source: Box<Error> },
}

pub type Result<T> = core::result::Result<T, Error>;
