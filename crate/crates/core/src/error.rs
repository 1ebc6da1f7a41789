use std::path::PathBuf;

/// Errors produced by the function tree library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("target not found: {0}")]
    TargetNotFound(String),

    #[error("column not found: {0}")]
    ColumnNotFound(String),

    #[error("missing value in column {column:?} at data row {row}")]
    MissingValue { column: String, row: usize },

    #[error("unparseable cell {value:?} in column {column:?} at data row {row}")]
    Unparseable {
        column: String,
        row: usize,
        value: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("every row was excluded from the smoother (basis weights below floor)")]
    NoUsableRows,

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("malformed model file: {0}")]
    Model(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
