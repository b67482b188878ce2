use proptest::prelude::*;

use precoding_core::metrics::Violation;
use precoding_core::model::ConstraintKind;
use precoding_core::scenarios::instantiate_scenario;
use precoding_core::solvers::{SolverStrategy, StrategyId};
use precoding_pipeline::{
    refine, run_pipeline, Feedback, FeedbackStatus, PipelineConfig, PipelineError, PlanStep, RuleBackend, SolverPlan,
    TerminatedBy,
};

const REGISTERED_IDS: [StrategyId; 9] = [
    StrategyId::SinrDualityPowerMin,
    StrategyId::CePhaseCoordinateDescent,
    StrategyId::OneBitGreedyCD,
    StrategyId::SecrecyNullspaceMaxMin,
    StrategyId::FdPowerMin,
    StrategyId::CrSumRateProjAscent,
    StrategyId::CrRobustSumRate,
    StrategyId::WmmseSumRate,
    StrategyId::HybridRobustCiAltMin,
];

const KINDS: [ConstraintKind; 5] = [
    ConstraintKind::TotalPower,
    ConstraintKind::PerUserRate,
    ConstraintKind::PerUserSinr,
    ConstraintKind::InterferenceTemperature,
    ConstraintKind::CiMargin,
];

const STATUSES: [FeedbackStatus; 4] = [
    FeedbackStatus::ValidationError,
    FeedbackStatus::RuntimeError,
    FeedbackStatus::NotConverged,
    FeedbackStatus::Infeasible,
];

fn feedback(status: FeedbackStatus, violations: Vec<Violation>) -> Feedback {
    let json = serde_json::json!({
        "status": status, "violations": violations, "objective": null, "iterations": null, "warnings": []
    });
    serde_json::from_value(json).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn refinement_yields_valid_next_revision(
        id in 0usize..9,
        status in 0usize..4,
        viol in proptest::collection::vec((0usize..5, 1e-6f64..10.0), 0..4),
        max_iter in 1u32..100_000,
        revision in 0u32..10,
    ) {
        let mut strategy = SolverStrategy::with_defaults(REGISTERED_IDS[id]).unwrap();
        strategy.hyperparams.max_iter = max_iter;
        let plan = SolverPlan { strategy, preprocessing: vec![], postprocessing: vec![], rendered_source: None, revision };
        let violations = viol.into_iter().enumerate().map(|(i, (k, m))| Violation {
            constraint_index: i, kind: KINDS[k], magnitude: m,
        }).collect();
        let ranked = REGISTERED_IDS.to_vec();
        match refine(&plan, &feedback(STATUSES[status], violations), &ranked) {
            Ok((next, _)) => {
                prop_assert_eq!(next.revision, revision + 1);
                prop_assert!(next.validate().is_ok());
                prop_assert!(next.rendered_source.is_some());
                let rescales = next.postprocessing.iter().filter(|s| *s == "power-rescale").count();
                prop_assert!(rescales <= 1);
            }
            Err(e) => prop_assert!(matches!(e, PipelineError::NoFurtherRefinement(_))),
        }
    }

    #[test]
    fn plan_step_parse_never_panics(s in "\\PC{0,24}") {
        if let Ok(step) = PlanStep::parse(&s) {
            prop_assert_eq!(PlanStep::parse(&step.to_string()).unwrap(), step);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_satisfy_result_invariants(id in 1u32..=9, snr in -5.0f64..30.0, seed in any::<u64>(), t_max in 0u32..6) {
        let (task, theta) = instantiate_scenario(id, snr, seed).unwrap();
        let config = PipelineConfig { t_max, ..PipelineConfig::default() };
        let run = run_pipeline(&task, &theta, &config, &RuleBackend);
        let r = &run.result;
        prop_assert!(r.check_invariants().is_ok());
        prop_assert!(r.plans.len() as u32 <= t_max + 1);
        if r.terminated_by == TerminatedBy::Accepted {
            prop_assert!(r.feedbacks.last().unwrap().violations.iter().all(|v| v.magnitude <= 1e-6));
            prop_assert!(r.final_objective.is_some());
        }
        for w in r.strategy_history.windows(2) {
            prop_assert_ne!(&w[0], &w[1]);
        }
    }
}
