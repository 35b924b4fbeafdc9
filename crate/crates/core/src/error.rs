use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("cell parse error at row {row}, column '{column}': {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("model bundle error: {0}")]
    Bundle(String),
    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
