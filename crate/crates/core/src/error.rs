use thiserror::Error;

pub type Result<T, E = MlsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MlsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("field level mismatch: {0} vs {1}")]
    LevelMismatch(usize, usize),
    #[error("division by zero")]
    DivisionByZero,
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("construction mismatch: {0}")]
    ConstructionMismatch(String),
    #[error("search exhausted its budget of {budget} candidates without a witness: {what}")]
    NotFound { what: String, budget: u64 },
    #[error("order exceeds cap {0}")]
    CapExceeded(u64),
    #[error("budget exceeded: {what} needs {needed}, budget is {budget}")]
    BudgetExceeded { what: String, needed: u64, budget: u64 },
    #[error("not a partial spread: members {0} and {1} intersect nontrivially")]
    NotAPartialSpread(usize, usize),
    #[error("projection is not injective: {0}")]
    InjectivityFail(String),
    #[error("element is not in {0}")]
    NotInGroup(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("overlapping factors: {0}")]
    Overlap(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
