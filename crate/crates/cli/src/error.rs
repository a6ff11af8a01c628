use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    #[error("usage error: {0}")]
    Usage(String),
    /// A numerical contract of the library was violated.
    #[error("contract failure: {0}")]
    Contract(#[from] gmje::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    /// Diagnostics ran but at least one check failed.
    #[error("{0} diagnostic check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Contract(_) | CliError::ChecksFailed(_) => 2,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("invalid JSON: {e}"))
    }
}
