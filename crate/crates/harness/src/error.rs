use std::io;

use precoding_core::scenarios::ScenarioError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("nothing to report")]
    EmptyInput,
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(e) => HarnessError::Io(e),
            other => HarnessError::Csv(format!("{other:?}")),
        }
    }
}
