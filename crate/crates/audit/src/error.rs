use std::path::PathBuf;

use essay_audit_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: {message}")]
    Row { path: PathBuf, row: usize, message: String },
    #[error("{path}: row {row}: duplicate essay_id {essay_id:?}")]
    DuplicateId { path: PathBuf, row: usize, essay_id: String },
    #[error("{path}: file is empty")]
    EmptyFile { path: PathBuf },
    #[error("configuration: {0}")]
    Config(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{context}: {source}")]
    Core { context: String, source: CoreError },
    #[error("request failed after {attempts} attempt(s): {message}")]
    Http { attempts: u32, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AuditError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AuditError::Io { path: path.into(), source }
    }

    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        AuditError::Core { context: context.into(), source }
    }
}

impl From<CoreError> for AuditError {
    fn from(source: CoreError) -> Self {
        AuditError::Core { context: "audit".to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, AuditError>;
