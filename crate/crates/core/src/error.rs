use thiserror::Error;

/// Errors raised anywhere in the training, clustering and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot normalize a vector with norm {norm:e}")]
    ZeroVector { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("log-softmax pool is empty")]
    EmptyPool,

    #[error("function evaluated to a non-finite value at coordinate {coordinate}")]
    NonFiniteEvaluation { coordinate: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("not enough labels for a batch: need {needed} {source_kind} labels, have {available}")]
    InsufficientLabels {
        source_kind: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("activation cache was produced by different parameters")]
    StaleCache,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label {0} has no centroid in the bank")]
    UnresolvedLabel(String),

    #[error("label {0} has no member embeddings")]
    EmptyLabel(String),

    #[error("pseudo-label budget of {limit} images unreachable: a full pass over {videos} videos produced no clustered images")]
    BudgetUnreachable { limit: usize, videos: usize },

    #[error("query {query} has no valid positive in the gallery")]
    NoValidPositive { query: usize },

    #[error("unsupported {what} format: {found}")]
    VersionMismatch { what: &'static str, found: String },

    #[error("malformed record at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
