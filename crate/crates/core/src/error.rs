use thiserror::Error;

pub type Result<T, E = PalError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PalError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("numerical abort: {0}")]
    NonFinite(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PalError {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numerical aborts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PalError::Config(_) => 2,
            PalError::NonFinite(_) => 3,
            _ => 1,
        }
    }
}
