use thiserror::Error;

/// Errors produced by the post-processing library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("value {value} in column `{column}` (row {row}) is outside [0, 1]")]
    Range {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("group `{0}` is empty")]
    EmptyGroup(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("training diverged (loss = {loss}); try a smaller learning rate")]
    Diverged { loss: f64 },

    #[error("instance too large for exhaustive search: n = {n}, max = {max}")]
    TooLarge { n: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
