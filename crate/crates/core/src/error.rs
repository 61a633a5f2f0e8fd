use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("budget exhausted: requested {requested} samples but only {available} are unlabeled")]
    BudgetExhausted { requested: usize, available: usize },

    #[error("invalid selection of sample {id}: {reason}")]
    InvalidSelection { id: usize, reason: &'static str },

    #[error("insufficient patients: need {required} distinct patients, only {available} have unlabeled samples")]
    InsufficientPatients { required: usize, available: usize },

    #[error("cannot train: {0}")]
    CannotTrain(String),

    #[error("training diverged: non-finite loss at optimizer step {step}")]
    Diverged { step: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
