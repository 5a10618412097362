use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sign undefined at zero")]
    SignAtZero,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("unsatisfiable constant constraint: {0} = 0")]
    UnsatisfiableConstant(i64),
    #[error("variable {0} is not registered")]
    UnregisteredVar(usize),
    #[error("invalid perturbation spec: {0}")]
    InvalidSpec(String),
    #[error("clean prediction wrong: model predicts {predicted}, label is {label}")]
    CleanPredictionWrong { predicted: usize, label: usize },
    #[error("refusing exact solve: {what} {size} exceeds cap {cap}")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
