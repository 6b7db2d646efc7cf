use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("profile data error for model '{model}': {msg}")]
    Data { model: String, msg: String },

    #[error("partition {partition}% is not on the profile grid of model '{model}'")]
    OffGrid { model: String, partition: u32 },

    #[error("batch {batch} exceeds the largest tabulated batch {max} for model '{model}'")]
    BatchCapacity { model: String, batch: u32, max: u32 },

    #[error("invalid gpulet state: {0}")]
    State(String),

    #[error("gpulets are not temporally sharable: {0}")]
    NotSharable(String),

    #[error("interference fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("search budget of {budget} states exceeded; reduce gpus/models or raise the budget")]
    BudgetExceeded { budget: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
