//! Agentic solver-generation workflow for precoding problems.
//!
//! A run turns a task description and scenario descriptor into a structured
//! problem specification, selects a registered optimization strategy,
//! writes an implementation prompt, and generates a validated solver plan.
//! The plan is executed, scored against the scenario's constraints, and
//! refined from that feedback until it is accepted or the refinement budget
//! is spent.
//!
//! Two backends implement the four stages: a deterministic rule backend and
//! a remote language-model backend. Either way, the only thing executed is a
//! validated [`SolverPlan`] naming a registered solver.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod backend;
mod error;
mod execute;
mod refine;
pub mod remote;
mod rules;
mod run;
mod transcript;
mod types;

pub use backend::StageBackend;
pub use error::PipelineError;
pub use execute::{execute_and_evaluate, ExecOptions};
pub use refine::{refine, refine_for_quality, RefineReason};
pub use rules::{annotate, default_preprocessing, ranked_strategies, render_source, RuleBackend};
pub use run::{best_baseline_value, run_pipeline, FaultInjection, PipelineConfig, PipelineRun, RunInput, RunSummary};
pub use transcript::{replay, ReplayReport, Stage, Transcript, TranscriptError, TranscriptLine};
pub use types::{
    AnnotatedConstraint, Coupling, Direction, DomainTag, Feedback, FeedbackStatus, ImplementationPrompt, ObjectiveSpec,
    PipelineResult, PlanStep, ProblemSpec, PromptSection, SolverPlan, TerminatedBy, Variable, PROMPT_SECTIONS,
};

use precoding_core::scenarios::{ScenarioDescriptor, TaskDescription};
use precoding_core::solvers::SolverStrategy;

/// Formulation stage with output validation.
pub fn formulate(
    task: &TaskDescription,
    theta: &ScenarioDescriptor,
    backend: &dyn StageBackend,
) -> Result<ProblemSpec, PipelineError> {
    let spec = backend.formulate(task, theta, &mut Vec::new())?;
    spec.validate_against(theta)?;
    Ok(spec)
}

/// Strategy selection stage with output validation.
pub fn select_strategy(spec: &ProblemSpec, backend: &dyn StageBackend) -> Result<SolverStrategy, PipelineError> {
    let s = backend.select_strategy(spec, &mut Vec::new())?;
    s.validate()
        .map_err(|e| PipelineError::SchemaViolation(e.to_string()))?;
    Ok(s)
}

/// Prompt upsampling stage with output validation.
pub fn upsample(
    theta: &ScenarioDescriptor,
    spec: &ProblemSpec,
    strategy: &SolverStrategy,
    backend: &dyn StageBackend,
) -> Result<ImplementationPrompt, PipelineError> {
    let p = backend.upsample(theta, spec, strategy, &mut Vec::new())?;
    p.validate()?;
    Ok(p)
}

/// Plan generation stage with output validation.
pub fn generate_plan(prompt: &ImplementationPrompt, backend: &dyn StageBackend) -> Result<SolverPlan, PipelineError> {
    let p = backend.generate_plan(prompt, &mut Vec::new())?;
    p.validate()?;
    Ok(p)
}
