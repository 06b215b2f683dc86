use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text requested; not a failure.
    #[error("{0}")]
    Info(String),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Budget(String),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Info(_) => "info",
            CliError::Usage(_) => "usage",
            CliError::Budget(_) => "budget",
            CliError::Internal(_) => "internal",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}

impl From<ewpitman::Error> for CliError {
    fn from(e: ewpitman::Error) -> Self {
        match e {
            ewpitman::Error::Budget { .. } => CliError::Budget(e.to_string()),
            ewpitman::Error::Contract(_) | ewpitman::Error::UnsupportedRegime(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("i/o: {e}"))
    }
}
