use precoding_core::scenarios::{instantiate_scenario, Catalog};
use precoding_core::solvers::StrategyId;
use precoding_pipeline::{
    replay, run_pipeline, FaultInjection, FeedbackStatus, PipelineConfig, RuleBackend, TerminatedBy, Transcript,
};

const SNRS: [f64; 6] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0];

fn accepted_feasibly(scenario: u32, snr: f64, seed: u64, config: &PipelineConfig) -> bool {
    let (task, theta) = instantiate_scenario(scenario, snr, seed).unwrap();
    let run = run_pipeline(&task, &theta, config, &RuleBackend);
    run.result.check_invariants().unwrap();
    run.result.terminated_by == TerminatedBy::Accepted
}

#[test]
fn every_scenario_is_accepted_on_a_few_seeds() {
    let config = PipelineConfig::default();
    let start = std::time::Instant::now();
    for id in 1..=9 {
        for snr in SNRS {
            for seed in 0..2 {
                assert!(
                    accepted_feasibly(id, snr, seed, &config),
                    "scenario {id} snr {snr} seed {seed}"
                );
            }
        }
    }
    eprintln!("108 runs in {:?}", start.elapsed());
}

#[test]
fn scenario_one_is_accepted_at_revision_zero() {
    let (task, theta) = instantiate_scenario(1, 10.0, 3).unwrap();
    let run = run_pipeline(&task, &theta, &PipelineConfig::default(), &RuleBackend);
    assert_eq!(run.result.terminated_by, TerminatedBy::Accepted);
    assert_eq!(run.result.plans.len(), 1);
    assert_eq!(
        run.result.strategy_history[0].strategy_id,
        StrategyId::SinrDualityPowerMin
    );
    assert!(run.result.final_objective.unwrap() > 0.0);
}

#[test]
fn not_converged_fault_is_repaired() {
    let config = PipelineConfig {
        fault: Some(FaultInjection {
            initial_max_iter: Some(1),
            postprocessing: vec![],
        }),
        ..PipelineConfig::default()
    };
    for seed in 0..5 {
        let (task, theta) = instantiate_scenario(8, 10.0, seed).unwrap();
        let run = run_pipeline(&task, &theta, &config, &RuleBackend);
        let r = &run.result;
        assert_eq!(r.feedbacks[0].status, FeedbackStatus::NotConverged, "seed {seed}");
        assert_eq!(
            r.terminated_by,
            TerminatedBy::Accepted,
            "seed {seed}: {:?}",
            r.feedbacks
        );
        assert!(r.plans.len() <= 6);
    }
}

#[test]
fn budget_violation_fault_is_repaired() {
    let config = PipelineConfig {
        fault: Some(FaultInjection {
            initial_max_iter: None,
            postprocessing: vec!["inflate:1.05".into()],
        }),
        ..PipelineConfig::default()
    };
    let (task, theta) = instantiate_scenario(1, 0.0, 1).unwrap();
    let run = run_pipeline(&task, &theta, &config, &RuleBackend);
    let r = &run.result;
    assert_eq!(r.feedbacks[0].status, FeedbackStatus::Infeasible);
    assert_eq!(r.terminated_by, TerminatedBy::Accepted);
    assert!(r
        .plans
        .last()
        .unwrap()
        .postprocessing
        .contains(&"power-rescale".to_string()));
}

#[test]
fn impossible_targets_end_unrecoverable() {
    let catalog = Catalog::with_overrides_json(
        r#"[{"scenario_id": 1, "family": "MuMimoPowerMin", "rate_target": 40.0, "p_max": 1.0}]"#,
    )
    .unwrap();
    let (task, theta) = catalog.instantiate(1, 0.0, 0).unwrap();
    let run = run_pipeline(&task, &theta, &PipelineConfig::default(), &RuleBackend);
    let r = &run.result;
    assert_ne!(r.terminated_by, TerminatedBy::Accepted);
    assert!(r.plans.len() <= 6);
    assert!(r.feedbacks.iter().all(|f| f.status != FeedbackStatus::Ok));
    r.check_invariants().unwrap();
}

#[test]
fn identical_seeds_give_identical_transcripts() {
    for id in [1, 3, 8, 9] {
        let (task, theta) = instantiate_scenario(id, 5.0, 11).unwrap();
        let a = run_pipeline(&task, &theta, &PipelineConfig::default(), &RuleBackend);
        let b = run_pipeline(&task, &theta, &PipelineConfig::default(), &RuleBackend);
        assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl(), "scenario {id}");
    }
}

#[test]
fn transcript_round_trips_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        fault: Some(FaultInjection {
            initial_max_iter: Some(1),
            postprocessing: vec![],
        }),
        ..PipelineConfig::default()
    };
    let (task, theta) = instantiate_scenario(8, 15.0, 2).unwrap();
    let run = run_pipeline(&task, &theta, &config, &RuleBackend);
    let path = dir.path().join("run.jsonl");
    run.transcript.write_new(&path).unwrap();
    assert!(
        run.transcript.write_new(&path).is_err(),
        "existing transcripts are never overwritten"
    );

    let back = Transcript::read(&path).unwrap();
    // numbers may change their in-memory representation, so compare the text
    assert_eq!(back.to_jsonl(), run.transcript.to_jsonl());
    assert_eq!(back.run_input().unwrap().theta, theta);
    let rebuilt = back.reconstruct().unwrap();
    assert_eq!(rebuilt.plans, run.result.plans);
    assert_eq!(rebuilt.terminated_by, run.result.terminated_by);
    assert_eq!(rebuilt.final_solution, run.result.final_solution);

    let report = replay(&back).unwrap();
    assert!(report.reproduced(), "{:?}", report.mismatched_revisions);
}

#[test]
fn truncated_transcript_is_corrupt() {
    let (task, theta) = instantiate_scenario(6, 0.0, 0).unwrap();
    let run = run_pipeline(&task, &theta, &PipelineConfig::default(), &RuleBackend);
    let text = run.transcript.to_jsonl();
    let cut: Vec<&str> = text.lines().collect();
    let without_result = cut[..cut.len() - 1].join("\n");
    let t = Transcript::parse_jsonl(&without_result).unwrap();
    assert!(replay(&t).is_err());
    assert!(Transcript::parse_jsonl("{\"type\": \"feedback\"").is_err());
}
