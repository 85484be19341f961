use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config files or specs.
    #[error("{0}")]
    Config(String),
    /// A stage ran but did not succeed.
    #[error("{0}")]
    Stage(String),
    #[error(transparent)]
    Core(#[from] aligner_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_config() => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Stage(_) => "stage",
            CliError::Core(e) if e.is_config() => "config",
            CliError::Core(_) => "core",
            CliError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;
