use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    /// A stage output failed structural or semantic validation.
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    /// The remote backend could not produce an answer.
    #[error("backend failure: {0}")]
    BackendFailure(String),
    #[error("request timed out after {0} s")]
    Timeout(u64),
    #[error("http error: {0}")]
    HttpError(String),
    #[error("no registered strategy applies: {0}")]
    NoApplicableStrategy(String),
    #[error("no further refinement available: {0}")]
    NoFurtherRefinement(String),
    #[error("configuration error: {0}")]
    Config(String),
}
