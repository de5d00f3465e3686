use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("malformed cost volume: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("solver: {0}")]
    Solver(#[from] moment_mrf::Error),
}

impl CliError {
    /// 2 for anything wrong with the inputs, 3 when the solver fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
