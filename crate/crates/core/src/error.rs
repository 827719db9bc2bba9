use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("channel has rank zero")]
    RankZero,

    /// A desk-scale complexity limit was exceeded.
    #[error("guard violation: {0}")]
    Guard(String),

    /// Configuration could not be parsed or failed validation. Each entry is one
    /// diagnostic naming the offending field (and line, when known).
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("subcarrier capacity exceeded: {needed} subcarriers needed, {available} available (deficit {})", needed - available)]
    Capacity { needed: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
