use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sagin_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    /// 2 configuration, 3 infeasible scenario, 4 numerical failure, 1 other.
    pub fn exit_code(&self) -> i32 {
        use sagin_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidArgument(_)) => 2,
            CliError::Core(E::Infeasible(_) | E::EmptyScenario { .. }) => 3,
            CliError::Core(E::Singular { .. } | E::NonFinite { .. } | E::Network(_)) => 4,
            CliError::CheckFailed(_) => 4,
            _ => 1,
        }
    }
}
