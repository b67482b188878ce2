//! Rule-table refinement of a plan from its execution feedback.

use serde::{Deserialize, Serialize};

use precoding_core::model::ConstraintKind;
use precoding_core::solvers::{SolverStrategy, StrategyId};

use crate::error::PipelineError;
use crate::rules::{default_preprocessing, render_source};
use crate::types::{Feedback, FeedbackStatus, PlanStep, SolverPlan};

// Upper ends of the hyperparameter schema shared by all strategies.
const MAX_ITER_CAP: u32 = 100_000;
const TOL_CAP: f64 = 1e-1;
const PENALTY_CAP: f64 = 1e9;
const TARGET_SCALE_CAP: f64 = 10.0;

/// Why a plan was revised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineReason {
    /// More iterations and a looser tolerance.
    NotConverged,
    /// Constraint violations tightened internally.
    Violations,
    /// Switched to the next-ranked strategy after a failure.
    StrategySwitch,
    /// Feasible but worse than the best baseline.
    ObjectiveQuality,
}

fn next_strategy(current: StrategyId, ranked: &[StrategyId]) -> Option<StrategyId> {
    match ranked.iter().position(|s| *s == current) {
        Some(i) => ranked.get(i + 1).copied(),
        None => ranked.iter().copied().find(|s| *s != current),
    }
}

/// True when `refine_for_quality` has somewhere to go.
pub fn has_next_strategy(plan: &SolverPlan, ranked: &[StrategyId]) -> bool {
    next_strategy(plan.strategy.strategy_id, ranked).is_some()
}

fn switched(plan: &SolverPlan, ranked: &[StrategyId]) -> Result<SolverPlan, PipelineError> {
    let current = plan.strategy.strategy_id;
    let next = next_strategy(current, ranked)
        .ok_or_else(|| PipelineError::NoFurtherRefinement(format!("no strategy ranked after {current}")))?;
    let strategy =
        SolverStrategy::with_defaults(next).map_err(|e| PipelineError::NoFurtherRefinement(e.to_string()))?;
    Ok(SolverPlan {
        strategy,
        preprocessing: default_preprocessing(next),
        postprocessing: plan.postprocessing.clone(),
        rendered_source: None,
        revision: plan.revision,
    })
}

fn finish(mut plan: SolverPlan, revision: u32) -> SolverPlan {
    plan.revision = revision;
    plan.rendered_source = Some(render_source(&plan));
    plan
}

/// Revises a plan after a non-Ok execution.
///
/// | feedback                         | action                                         |
/// |----------------------------------|------------------------------------------------|
/// | NotConverged                     | max_iter ×4, tol ×10                           |
/// | TotalPower violated              | append a power-rescale post-processing step    |
/// | rate or SINR violated            | target scale ×(1 + relative violation)         |
/// | any other violation              | penalty ×10                                    |
/// | runtime, validation or proven infeasibility | next-ranked strategy                |
///
/// When a knob is already at its cap, the next-ranked strategy is used
/// instead. Fails with `NoFurtherRefinement` once the ranking is exhausted.
pub fn refine(
    plan: &SolverPlan,
    feedback: &Feedback,
    ranked: &[StrategyId],
) -> Result<(SolverPlan, RefineReason), PipelineError> {
    let revision = plan.revision + 1;
    let hp = plan.strategy.hyperparams;
    match feedback.status {
        FeedbackStatus::Ok => Err(PipelineError::NoFurtherRefinement("feedback is Ok".into())),
        FeedbackStatus::NotConverged if hp.max_iter < MAX_ITER_CAP => {
            let mut next = plan.clone();
            next.strategy.hyperparams.max_iter = hp.max_iter.saturating_mul(4).min(MAX_ITER_CAP);
            next.strategy.hyperparams.tol = (hp.tol * 10.0).min(TOL_CAP);
            Ok((finish(next, revision), RefineReason::NotConverged))
        }
        FeedbackStatus::Infeasible if !feedback.violations.is_empty() => {
            let mut next = plan.clone();
            let mut changed = false;
            let mut rel_target = 0.0f64;
            let mut other = false;
            for v in &feedback.violations {
                match v.kind {
                    ConstraintKind::TotalPower => {
                        let step = PlanStep::PowerRescale.to_string();
                        if !next.postprocessing.contains(&step) {
                            next.postprocessing.push(step);
                            changed = true;
                        } else {
                            other = true;
                        }
                    }
                    ConstraintKind::PerUserRate | ConstraintKind::PerUserSinr => {
                        rel_target = rel_target.max(v.magnitude);
                    }
                    _ => other = true,
                }
            }
            let h = &mut next.strategy.hyperparams;
            if rel_target > 0.0 && h.target_scale < TARGET_SCALE_CAP {
                h.target_scale = (h.target_scale * (1.0 + rel_target)).min(TARGET_SCALE_CAP);
                changed = true;
            }
            if other && h.penalty < PENALTY_CAP {
                h.penalty = (h.penalty * 10.0).min(PENALTY_CAP);
                changed = true;
            }
            if changed {
                Ok((finish(next, revision), RefineReason::Violations))
            } else {
                Ok((finish(switched(plan, ranked)?, revision), RefineReason::StrategySwitch))
            }
        }
        _ => Ok((finish(switched(plan, ranked)?, revision), RefineReason::StrategySwitch)),
    }
}

/// Switches a feasible plan to the next-ranked strategy.
pub fn refine_for_quality(plan: &SolverPlan, ranked: &[StrategyId]) -> Result<SolverPlan, PipelineError> {
    Ok(finish(switched(plan, ranked)?, plan.revision + 1))
}
