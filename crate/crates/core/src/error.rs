use std::path::PathBuf;

/// Errors surfaced by the engine, the analysis functions and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("key is {got} bytes, expected {expected}")]
    KeyWidth { expected: usize, got: usize },

    #[error("value is {got} bytes, expected {expected}")]
    ValueWidth { expected: usize, got: usize },

    #[error("false positive rate {0} is outside (0, 1)")]
    InvalidFpr(f64),

    #[error("cannot build a Bloom filter over zero keys")]
    EmptyFilter,

    #[error("compaction policy {policy} is outside [1, {size_ratio}]")]
    PolicyOutOfRange { policy: usize, size_ratio: usize },

    #[error("level {0} does not exist")]
    NoSuchLevel(usize),

    #[error("propagation needs K_cur <= K_prev and both >= 1 (got K_prev={prev}, K_cur={cur})")]
    PropagationOrder { prev: f64, cur: f64 },

    #[error("invalid cost-model input: {0}")]
    InvalidCostInput(String),

    #[error("heuristic thresholds must satisfy 0 <= bottom <= top <= 1 (got {bottom}, {top})")]
    Thresholds { bottom: f64, top: f64 },

    #[error("unknown level tag {0}")]
    UnknownLevel(usize),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
