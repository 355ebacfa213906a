use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed SDF record. `record` and `line` are 1-based.
    #[error("SDF parse error in record {record}, line {line}: {message}")]
    Sdf {
        record: usize,
        line: usize,
        message: String,
    },

    /// Malformed tabular input. `row` is the 1-based line number in the file.
    #[error("table error at row {row}: {message}")]
    Table { row: usize, message: String },

    #[error("unknown element symbol `{0}`")]
    UnknownElement(String),

    #[error("missing {what} for complexes: {}", .ids.join(", "))]
    MissingData { what: String, ids: Vec<String> },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn missing(what: impl Into<String>, mut ids: Vec<String>) -> Self {
        ids.sort();
        ids.dedup();
        Error::MissingData {
            what: what.into(),
            ids,
        }
    }
}
