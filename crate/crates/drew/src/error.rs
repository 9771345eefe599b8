use std::path::PathBuf;

pub type Result<T, E = DrewError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum DrewError {
    #[error(transparent)]
    Core(#[from] drew_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("not a store file (bad magic)")]
    Magic,
    #[error("unsupported store version {0}")]
    Version(u16),
    #[error("store file truncated or malformed: {0}")]
    Truncated(String),
    #[error("store checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    Checksum { stored: u64, computed: u64 },
    #[error("store has d={found}, expected d={expected}")]
    Dimension { expected: usize, found: usize },
    #[error("CSV: {0}")]
    CsvFormat(String),
    #[error("config: {0}")]
    Config(String),
}

impl DrewError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
