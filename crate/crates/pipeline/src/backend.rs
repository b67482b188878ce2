use precoding_core::scenarios::{ScenarioDescriptor, TaskDescription};
use precoding_core::solvers::SolverStrategy;

use crate::error::PipelineError;
use crate::types::{ImplementationPrompt, ProblemSpec, SolverPlan};

/// The four generation stages. Rule and remote backends implement the same
/// contract, so either can drive [`crate::run_pipeline`].
///
/// Stages push human-readable notes (retries, fallbacks) into `warnings`.
pub trait StageBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn formulate(
        &self,
        task: &TaskDescription,
        theta: &ScenarioDescriptor,
        warnings: &mut Vec<String>,
    ) -> Result<ProblemSpec, PipelineError>;

    fn select_strategy(&self, spec: &ProblemSpec, warnings: &mut Vec<String>) -> Result<SolverStrategy, PipelineError>;

    fn upsample(
        &self,
        theta: &ScenarioDescriptor,
        spec: &ProblemSpec,
        strategy: &SolverStrategy,
        warnings: &mut Vec<String>,
    ) -> Result<ImplementationPrompt, PipelineError>;

    fn generate_plan(
        &self,
        prompt: &ImplementationPrompt,
        warnings: &mut Vec<String>,
    ) -> Result<SolverPlan, PipelineError>;
}
