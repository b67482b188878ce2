//! Plan execution and evaluation. Every failure mode is reported through
//! the feedback status; nothing escapes as an error or panic.

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use precoding_core::baselines::family_of;
use precoding_core::metrics::{compute_metrics, feasibility_check, total_power, DEFAULT_FEASIBILITY_TOL};
use precoding_core::model::Solution;
use precoding_core::scenarios::ScenarioDescriptor;
use precoding_core::solvers::{registry_lookup, solve, SolveOptions, SolverError, SolverOutcome};

use crate::types::{Feedback, FeedbackStatus, PlanStep, SolverPlan};

/// Settings shared by every execution in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecOptions {
    /// Relative feasibility tolerance per constraint.
    pub feasibility_tol: f64,
    /// Wall-time cap per solver run, in seconds.
    pub wall_time_cap_s: f64,
    /// Seed for randomized restarts inside solvers.
    pub seed: u64,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
            wall_time_cap_s: 60.0,
            seed: 0,
        }
    }
}

fn scale_solution(solution: Solution, factor: f64) -> Option<Solution> {
    match solution {
        Solution::BeamformerMatrix(w) => Some(Solution::BeamformerMatrix(w.scale(factor))),
        Solution::HybridPair { f_rf, f_bb } => Some(Solution::HybridPair {
            f_rf,
            f_bb: f_bb.scale(factor),
        }),
        _ => None,
    }
}

/// Applies power post-processing steps. Constant-envelope and 1-bit
/// solutions have fixed power, so the steps leave them unchanged.
fn postprocess(
    mut solution: Solution,
    steps: &[PlanStep],
    theta: &ScenarioDescriptor,
    warnings: &mut Vec<String>,
) -> Solution {
    let p_max = theta.p_max();
    for step in steps {
        let power = total_power(&solution, theta);
        let target = match step {
            PlanStep::PowerRescale if power > p_max => p_max,
            PlanStep::PowerRescale => continue,
            PlanStep::Inflate(r) => r * p_max,
            PlanStep::MrtCompositeInit | PlanStep::ZfCompositeInit => continue,
        };
        if !(power > 0.0) {
            continue;
        }
        match scale_solution(solution.clone(), (target / power).sqrt()) {
            Some(s) => solution = s,
            None => warnings.push(format!(
                "{step} ignored: transmit power is fixed by the hardware alphabet"
            )),
        }
    }
    solution
}

fn run_with_cap(
    plan: &SolverPlan,
    theta: &ScenarioDescriptor,
    opts: &ExecOptions,
) -> Result<Result<SolverOutcome, SolverError>, String> {
    let (tx, rx) = mpsc::channel();
    let id = plan.strategy.strategy_id;
    let options = SolveOptions {
        hyperparams: plan.strategy.hyperparams,
        init: plan.composite_init(),
        seed: opts.seed,
    };
    let theta = theta.clone();
    thread::Builder::new()
        .name(format!("solver-{id}"))
        .spawn(move || {
            let _ = tx.send(solve(id, &theta, &options));
        })
        .map_err(|e| format!("could not start solver thread: {e}"))?;
    let cap = Duration::from_secs_f64(opts.wall_time_cap_s.max(0.0));
    match rx.recv_timeout(cap) {
        Ok(r) => Ok(r),
        Err(mpsc::RecvTimeoutError::Timeout) => Err(format!("exceeded wall-time cap of {} s", opts.wall_time_cap_s)),
        Err(mpsc::RecvTimeoutError::Disconnected) => Err("solver panicked".into()),
    }
}

/// Runs `plan` on `theta` under the wall-time cap and scores the result.
pub fn execute_and_evaluate(
    plan: &SolverPlan,
    theta: &ScenarioDescriptor,
    opts: &ExecOptions,
) -> (Option<Solution>, Feedback) {
    let started = Instant::now();
    let (solution, mut fb) = execute_inner(plan, theta, opts);
    fb.wall_time = started.elapsed().as_secs_f64();
    (solution, fb)
}

fn execute_inner(plan: &SolverPlan, theta: &ScenarioDescriptor, opts: &ExecOptions) -> (Option<Solution>, Feedback) {
    let fail = |status, msg: String| {
        let mut fb = Feedback::new(status);
        fb.warnings.push(msg);
        (None, fb)
    };
    if let Err(e) = plan.validate() {
        return fail(FeedbackStatus::ValidationError, e.to_string());
    }
    let handle = match registry_lookup(plan.strategy.strategy_id) {
        Ok(h) => h,
        Err(e) => return fail(FeedbackStatus::ValidationError, e.to_string()),
    };
    if handle.architecture != theta.sys.architecture {
        return fail(
            FeedbackStatus::ValidationError,
            format!(
                "{} needs a {:?} transmitter, scenario has {:?}",
                handle.id, handle.architecture, theta.sys.architecture
            ),
        );
    }
    let steps = match plan.post_steps() {
        Ok(s) => s,
        Err(e) => return fail(FeedbackStatus::ValidationError, e.to_string()),
    };

    let (outcome, mut status) = match run_with_cap(plan, theta, opts) {
        Err(msg) => return fail(FeedbackStatus::RuntimeError, msg),
        Ok(Ok(out)) => (out, FeedbackStatus::Ok),
        Ok(Err(SolverError::NotConverged { outcome })) => (*outcome, FeedbackStatus::NotConverged),
        Ok(Err(e @ (SolverError::Infeasible(_) | SolverError::DegenerateNullspace))) => {
            return fail(FeedbackStatus::Infeasible, e.to_string());
        }
        Ok(Err(
            e
            @ (SolverError::InvalidHyperparam { .. } | SolverError::InvalidInput(_) | SolverError::UnknownStrategy(_)),
        )) => return fail(FeedbackStatus::ValidationError, e.to_string()),
        Ok(Err(e)) => return fail(FeedbackStatus::RuntimeError, e.to_string()),
    };

    let mut fb = Feedback::new(status);
    fb.iterations = Some(outcome.iterations);
    let solution = postprocess(outcome.solution, &steps, theta, &mut fb.warnings);
    let violations = match feasibility_check(&solution, theta, opts.feasibility_tol) {
        Ok(v) => v,
        Err(e) => return fail(FeedbackStatus::RuntimeError, e.to_string()),
    };
    let objective = compute_metrics(&solution, theta)
        .ok()
        .and_then(|m| family_of(theta).metric().value(&m));
    match objective {
        Some(v) if v.is_finite() => fb.objective = Some(v),
        _ => {
            fb.warnings.push("objective is not finite".into());
            status = FeedbackStatus::RuntimeError;
        }
    }
    if status == FeedbackStatus::Ok && !violations.is_empty() {
        status = FeedbackStatus::Infeasible;
    }
    fb.status = status;
    fb.violations = violations;
    (Some(solution), fb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use precoding_core::scenarios::instantiate_scenario;
    use precoding_core::solvers::{SolverStrategy, StrategyId};

    fn plan(id: StrategyId) -> SolverPlan {
        SolverPlan {
            strategy: SolverStrategy::with_defaults(id).unwrap(),
            preprocessing: vec![],
            postprocessing: vec![],
            rendered_source: None,
            revision: 0,
        }
    }

    #[test]
    fn inflate_then_rescale_lands_on_budget() {
        let (_, theta) = instantiate_scenario(1, 10.0, 2).unwrap();
        let mut p = plan(StrategyId::SinrDualityPowerMin);
        p.postprocessing = vec!["inflate:1.05".into()];
        let (_, fb) = execute_and_evaluate(&p, &theta, &ExecOptions::default());
        assert_eq!(fb.status, FeedbackStatus::Infeasible);
        assert!((fb.violations[0].magnitude - 2.0).abs() < 1e-9);
        p.postprocessing.push("power-rescale".into());
        let (s, fb) = execute_and_evaluate(&p, &theta, &ExecOptions::default());
        assert_eq!(fb.status, FeedbackStatus::Ok);
        assert!((total_power(&s.unwrap(), &theta) - 40.0).abs() < 1e-9);
    }

    #[test]
    fn zero_cap_reports_runtime_error() {
        let (_, theta) = instantiate_scenario(9, 10.0, 2).unwrap();
        let opts = ExecOptions {
            wall_time_cap_s: 0.0,
            ..ExecOptions::default()
        };
        let (s, fb) = execute_and_evaluate(&plan(StrategyId::HybridRobustCiAltMin), &theta, &opts);
        assert!(s.is_none());
        assert_eq!(fb.status, FeedbackStatus::RuntimeError);
    }
}
