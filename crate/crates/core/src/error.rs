use thiserror::Error;

#[derive(Debug, Error)]
pub enum QsdError {
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("cell index {index} out of range for grid with {cells} cells")]
    CellOutOfRange { index: usize, cells: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("oracle refuses {cells} free cells (limit {limit}); pass force to override")]
    OracleTooLarge { cells: usize, limit: usize },

    #[error("no scale survives the success filter; falling back to baseline 0")]
    EmptySelection,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{0}")]
    Input(String),
}

pub type Result<T, E = QsdError> = std::result::Result<T, E>;

impl QsdError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        QsdError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        QsdError::Json {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: impl AsRef<std::path::Path>, source: csv::Error) -> Self {
        QsdError::Csv {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
