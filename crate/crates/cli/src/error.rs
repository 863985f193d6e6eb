use thiserror::Error;

/// Errors surfaced by the driver, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("{filter}: {failed} of {runs} runs failed (limit 1%)")]
    FailureThreshold {
        filter: String,
        failed: usize,
        runs: usize,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Scenario(_) => 3,
            CliError::FailureThreshold { .. } => 4,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<hybrid_kf::Error> for CliError {
    fn from(e: hybrid_kf::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
