//! The full workflow: formulate, select, upsample, generate, then execute
//! and refine until the plan is accepted or the refinement budget runs out.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use precoding_core::baselines::{baselines_for, family_of, run_baseline};
use precoding_core::metrics::{compute_metrics, feasibility_check};
use precoding_core::model::Solution;
use precoding_core::scenarios::{ScenarioDescriptor, TaskDescription};
use precoding_core::solvers::StrategyId;

use crate::backend::StageBackend;
use crate::execute::{execute_and_evaluate, ExecOptions};
use crate::refine::{has_next_strategy, refine, refine_for_quality, RefineReason};
use crate::rules::{ranked_strategies, render_source};
use crate::transcript::{Stage, Transcript, TranscriptLine};
use crate::types::{FeedbackStatus, PipelineResult, TerminatedBy};

/// Deliberate defects injected into the first plan, to exercise recovery.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    /// Overrides the first plan's iteration limit.
    #[serde(default)]
    pub initial_max_iter: Option<u32>,
    /// Post-processing steps appended to the first plan.
    #[serde(default)]
    pub postprocessing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Maximum number of refinements; at most `t_max + 1` executions.
    pub t_max: u32,
    /// Switch strategy when a feasible result loses to a baseline.
    pub objective_quality_check: bool,
    pub exec: ExecOptions,
    #[serde(default)]
    pub fault: Option<FaultInjection>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            t_max: 5,
            objective_quality_check: true,
            exec: ExecOptions::default(),
            fault: None,
        }
    }
}

/// What the first transcript line records about a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInput {
    pub backend: String,
    pub task: TaskDescription,
    pub theta: ScenarioDescriptor,
    pub config: PipelineConfig,
}

/// What the last transcript line records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub terminated_by: TerminatedBy,
    pub final_objective: Option<f64>,
    pub final_solution: Option<Solution>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub result: PipelineResult,
    pub transcript: Transcript,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("stage artifacts serialize")
}

/// Best metric value among the feasible baselines of the scenario.
pub fn best_baseline_value(theta: &ScenarioDescriptor, seed: u64, tol: f64) -> Option<f64> {
    let family = family_of(theta);
    let metric = family.metric();
    baselines_for(family)
        .iter()
        .filter_map(|kind| run_baseline(*kind, theta, seed).ok())
        .filter(|s| feasibility_check(s, theta, tol).is_ok_and(|v| v.is_empty()))
        .filter_map(|s| compute_metrics(&s, theta).ok().and_then(|m| metric.value(&m)))
        .filter(|v| v.is_finite())
        .reduce(|a, b| if metric.better(b, a) { b } else { a })
}

fn worse_than_baseline(objective: f64, theta: &ScenarioDescriptor, config: &PipelineConfig) -> Option<f64> {
    let best = best_baseline_value(theta, config.exec.seed, config.exec.feasibility_tol)?;
    let metric = family_of(theta).metric();
    let slack = 1e-9 * best.abs().max(objective.abs());
    let worse = if metric.higher_is_better() {
        objective < best - slack
    } else {
        objective > best + slack
    };
    worse.then_some(best)
}

struct Recorder {
    transcript: Transcript,
}

impl Recorder {
    fn input<T: Serialize>(&mut self, stage: Stage, revision: u32, payload: &T) {
        self.transcript.lines.push(TranscriptLine::StageInput {
            stage,
            revision,
            payload: to_value(payload),
        });
    }

    fn output<T: Serialize>(&mut self, stage: Stage, revision: u32, payload: &T) {
        self.transcript.lines.push(TranscriptLine::StageOutput {
            stage,
            revision,
            payload: to_value(payload),
        });
    }
}

/// Runs the whole workflow. Never fails: stage errors end the run as
/// `Unrecoverable` with the error recorded in the warnings.
pub fn run_pipeline(
    task: &TaskDescription,
    theta: &ScenarioDescriptor,
    config: &PipelineConfig,
    backend: &dyn StageBackend,
) -> PipelineRun {
    let mut rec = Recorder {
        transcript: Transcript::default(),
    };
    rec.input(
        Stage::Run,
        0,
        &RunInput {
            backend: backend.name().to_string(),
            task: task.clone(),
            theta: theta.clone(),
            config: config.clone(),
        },
    );
    let mut result = PipelineResult {
        spec: None,
        strategy_history: Vec::new(),
        plans: Vec::new(),
        feedbacks: Vec::new(),
        final_solution: None,
        final_objective: None,
        terminated_by: TerminatedBy::Unrecoverable,
        warnings: Vec::new(),
    };
    if let Err(e) = drive(task, theta, config, backend, &mut rec, &mut result) {
        result.warnings.push(e);
        result.terminated_by = TerminatedBy::Unrecoverable;
    }
    let summary = RunSummary {
        terminated_by: result.terminated_by,
        final_objective: result.final_objective,
        final_solution: result.final_solution.clone(),
        warnings: result.warnings.clone(),
    };
    let last = result.plans.last().map_or(0, |p| p.revision);
    rec.output(Stage::Result, last, &summary);
    PipelineRun {
        result,
        transcript: rec.transcript,
    }
}

fn drive(
    task: &TaskDescription,
    theta: &ScenarioDescriptor,
    config: &PipelineConfig,
    backend: &dyn StageBackend,
    rec: &mut Recorder,
    result: &mut PipelineResult,
) -> Result<(), String> {
    let warnings = &mut result.warnings;

    rec.input(Stage::Formulate, 0, &json!({ "task": task, "theta": theta }));
    let spec = backend
        .formulate(task, theta, warnings)
        .and_then(|s| s.validate_against(theta).map(|_| s))
        .map_err(|e| format!("formulate: {e}"))?;
    rec.output(Stage::Formulate, 0, &spec);
    result.spec = Some(spec.clone());

    rec.input(Stage::SelectStrategy, 0, &spec);
    let ranked = ranked_strategies(&spec).map_err(|e| format!("select: {e}"))?;
    let strategy = backend
        .select_strategy(&spec, warnings)
        .and_then(|s| {
            s.validate()
                .map(|_| s)
                .map_err(|e| crate::PipelineError::SchemaViolation(e.to_string()))
        })
        .map_err(|e| format!("select: {e}"))?;
    rec.output(Stage::SelectStrategy, 0, &strategy);
    // put the selected strategy first, keeping the rule order for the rest
    let mut ranked: Vec<StrategyId> = ranked.into_iter().filter(|s| *s != strategy.strategy_id).collect();
    ranked.insert(0, strategy.strategy_id);

    rec.input(Stage::Upsample, 0, &json!({ "spec": spec, "strategy": strategy }));
    let prompt = backend
        .upsample(theta, &spec, &strategy, warnings)
        .and_then(|p| p.validate().map(|_| p))
        .map_err(|e| format!("upsample: {e}"))?;
    rec.output(Stage::Upsample, 0, &prompt);

    rec.input(Stage::GeneratePlan, 0, &prompt);
    let mut plan = backend
        .generate_plan(&prompt, warnings)
        .and_then(|p| p.validate().map(|_| p))
        .map_err(|e| format!("generate_plan: {e}"))?;
    plan.revision = 0;
    if let Some(fault) = &config.fault {
        if let Some(m) = fault.initial_max_iter {
            plan.strategy.hyperparams.max_iter = m;
        }
        plan.postprocessing.extend(fault.postprocessing.iter().cloned());
        warnings.push(format!("fault injected into revision 0: {}", to_value(fault)));
    }
    plan.rendered_source = Some(render_source(&plan));
    rec.output(Stage::GeneratePlan, 0, &plan);

    let mut best_ok: Option<(Solution, f64)> = None;
    loop {
        if result.strategy_history.last() != Some(&plan.strategy) {
            result.strategy_history.push(plan.strategy.clone());
        }
        result.plans.push(plan.clone());
        let (solution, feedback) = execute_and_evaluate(&plan, theta, &config.exec);
        rec.transcript.lines.push(TranscriptLine::Feedback {
            revision: plan.revision,
            feedback: feedback.clone(),
        });
        result.feedbacks.push(feedback.clone());
        let at_budget = plan.revision >= config.t_max;

        if feedback.status == FeedbackStatus::Ok {
            let objective = feedback.objective.expect("Ok feedback carries an objective");
            let solution = solution.expect("Ok feedback carries a solution");
            let quality_gap = (config.objective_quality_check && !at_budget && has_next_strategy(&plan, &ranked))
                .then(|| worse_than_baseline(objective, theta, config))
                .flatten();
            match quality_gap {
                None => {
                    result.final_solution = Some(solution);
                    result.final_objective = Some(objective);
                    result.terminated_by = TerminatedBy::Accepted;
                    return Ok(());
                }
                Some(best) => {
                    result.warnings.push(format!(
                        "revision {}: objective {objective} worse than best baseline {best}",
                        plan.revision
                    ));
                    best_ok = Some((solution, objective));
                    let next = refine_for_quality(&plan, &ranked).map_err(|e| e.to_string())?;
                    rec.transcript.lines.push(TranscriptLine::Refinement {
                        revision: next.revision,
                        reason: RefineReason::ObjectiveQuality,
                        plan: next.clone(),
                    });
                    plan = next;
                    continue;
                }
            }
        }
        if at_budget {
            result.terminated_by = TerminatedBy::MaxRefinements;
            keep_best(result, best_ok);
            return Ok(());
        }
        match refine(&plan, &feedback, &ranked) {
            Ok((next, reason)) => {
                rec.transcript.lines.push(TranscriptLine::Refinement {
                    revision: next.revision,
                    reason,
                    plan: next.clone(),
                });
                plan = next;
            }
            Err(e) => {
                result.warnings.push(e.to_string());
                result.terminated_by = TerminatedBy::Unrecoverable;
                keep_best(result, best_ok);
                return Ok(());
            }
        }
    }
}

/// A run that ends without acceptance still reports the best feasible
/// solution seen, if any.
fn keep_best(result: &mut PipelineResult, best_ok: Option<(Solution, f64)>) {
    if let Some((s, v)) = best_ok {
        result.final_solution = Some(s);
        result.final_objective = Some(v);
    }
}
