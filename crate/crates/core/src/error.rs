use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance has no points")]
    EmptyInstance,

    #[error("dimension mismatch: expected dim={expected}, got dim={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },

    #[error("weight of point {index} must be positive and finite")]
    InvalidWeight { index: usize },

    #[error("empty cluster")]
    EmptyCluster,

    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },

    #[error("label {label} outside [0, {k})")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("cluster {0} has no members")]
    MissingLabel(usize),

    #[error("point index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point {0} is already a member of the cluster")]
    AlreadyMember(usize),

    #[error("expected {expected} centers, got {got}")]
    CenterCount { expected: usize, got: usize },

    #[error("margin parameter must exceed 1")]
    MarginParameter,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle abstained on pair ({0}, {1})")]
    Abstained(usize, usize),

    #[error("abstention budget exceeded (limit {limit})")]
    AbstentionBudgetExceeded { limit: usize },

    #[error("recovery failed: margin assumption likely violated ({0})")]
    RecoveryFailed(String),

    #[error("invalid X3C instance: {0}")]
    InvalidX3c(String),

    #[error("no real solution to the layout equations")]
    NoLayout,

    #[error("not realizable as nice clustering (column {column})")]
    NotRealizable { column: usize },

    #[error("rows {0:?} do not form an exact cover")]
    NotExactCover(Vec<usize>),

    #[error("instance too large for brute force ({0})")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
