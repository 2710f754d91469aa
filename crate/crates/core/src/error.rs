use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("group index {group} out of range 1..={groups}")]
    GroupOutOfRange { group: usize, groups: usize },

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("group {group} has no rows")]
    EmptyGroup { group: usize },

    #[error("loss not applicable: {0}")]
    IncompatibleLoss(String),

    #[error("FNR undefined for group {group} (no positive labels)")]
    FnrUndefined { group: usize },

    #[error("invalid loss spec `{input}`: {reason}")]
    LossParse { input: String, reason: String },

    #[error("swap precondition violated: {0}")]
    SwapPrecondition(String),

    #[error(
        "normal equations are rank deficient ({dim} unknowns) and the ridge fallback is disabled"
    )]
    RankDeficient { dim: usize },

    #[error("weighted sample has zero total weight")]
    ZeroWeight,

    #[error("evaluation budget exceeded: {required} evaluations required, budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("too many points for separator enumeration: {got} > {max}")]
    TooManyPoints { got: usize, max: usize },

    #[error("learner contract violated in group {group}: {detail}")]
    ContractViolation { group: usize, detail: String },

    #[error(
        "fixed-profile target of {target} positives is not achievable in group {group}; nearest achievable is {nearest}"
    )]
    ProfileUnachievable {
        group: usize,
        target: f64,
        nearest: u64,
    },

    #[error("{groups} groups exceed the configured cap of {cap}")]
    TooManyGroups { groups: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("row {row}, column `{column}`: {reason}")]
    Cell {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("dataset discarded: {0}")]
    Discarded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
