use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unknown examples, malformed configuration.
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] almiso::Error),
    #[error("configuration: {0}")]
    Config(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status: 2 for usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
