use serde_json::json;
use thiserror::Error;

use precoding_core::scenarios::ScenarioError;
use precoding_harness::HarnessError;
use precoding_pipeline::TranscriptError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("unknown scenario {0}")]
    UnknownScenario(u32),
    #[error("{0}")]
    UnknownMethod(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    CorruptTranscript(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Unrecoverable(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::UnknownScenario(_) => "UnknownScenario",
            CliError::UnknownMethod(_) => "UnknownMethod",
            CliError::Config(_) => "ConfigError",
            CliError::CorruptTranscript(_) => "CorruptTranscript",
            CliError::Infeasible(_) => "Infeasible",
            CliError::Unrecoverable(_) => "Unrecoverable",
            CliError::Io(_) => "IoError",
        }
    }

    /// 0 success, 2 usage or unknown entity, 3 configuration, 4 infeasible
    /// or unrecoverable.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::UnknownScenario(_)
            | CliError::UnknownMethod(_)
            | CliError::CorruptTranscript(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 3,
            CliError::Infeasible(_) | CliError::Unrecoverable(_) => 4,
        }
    }

    /// One JSON object per error, for stderr.
    pub fn to_line(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() }).to_string()
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::UnknownScenario(id) => CliError::UnknownScenario(id),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Scenario(s) => s.into(),
            HarnessError::UnknownMethod(m) => CliError::UnknownMethod(format!("unknown method `{m}`")),
            HarnessError::InvalidConfig(m) => CliError::Config(m),
            HarnessError::EmptyInput => CliError::Unrecoverable("nothing to report".into()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<TranscriptError> for CliError {
    fn from(e: TranscriptError) -> Self {
        match e {
            TranscriptError::Corrupt(m) => CliError::CorruptTranscript(m),
            TranscriptError::Io(e) => CliError::Io(e.to_string()),
        }
    }
}
