/// Errors mapped to process exit codes: 1 for configuration problems,
/// 2 for unreadable or invalid data and other I/O failures.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0:#}")]
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        CliError::Data(e.into())
    }
}

impl From<relevance_core::Error> for CliError {
    fn from(e: relevance_core::Error) -> Self {
        use relevance_core::Error as E;
        match e {
            E::Hyperparameters(m) => CliError::Config(m),
            other => CliError::Data(other.into()),
        }
    }
}
