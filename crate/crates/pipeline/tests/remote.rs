use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use precoding_core::scenarios::instantiate_scenario;
use precoding_pipeline::remote::{LlmClient, RemoteBackend, RemoteConfig, RemoteStage, Transport, TransportError};
use precoding_pipeline::{
    run_pipeline, PipelineConfig, PipelineError, ProblemSpec, RuleBackend, StageBackend, TerminatedBy,
};

/// Replays scripted replies and records every request body.
#[derive(Default)]
struct Scripted {
    replies: Mutex<VecDeque<Result<String, TransportError>>>,
    requests: Mutex<Vec<Value>>,
}

impl Scripted {
    fn new(replies: Vec<Result<String, TransportError>>) -> Arc<Self> {
        Arc::new(Self {
            replies: Mutex::new(replies.into()),
            requests: Mutex::default(),
        })
    }
}

impl Transport for Scripted {
    fn post_json(&self, url: &str, bearer: &str, body: &Value, _t: Duration) -> Result<String, TransportError> {
        assert_eq!(url, "http://llm.test/v1/chat/completions");
        assert_eq!(bearer, "secret");
        self.requests.lock().unwrap().push(body.clone());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Http("script exhausted".into())))
    }
}

fn chat(content: &str) -> Result<String, TransportError> {
    Ok(json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string())
}

fn client(t: Arc<dyn Transport>) -> LlmClient {
    let cfg = RemoteConfig::new(
        Some("http://llm.test/v1/".into()),
        Some("test-model".into()),
        Some("secret".into()),
    )
    .unwrap();
    LlmClient::new(cfg, t)
}

/// Valid stage replies for one scenario, produced by the rule backend.
fn fixture(scenario: u32) -> Vec<String> {
    let (task, theta) = instantiate_scenario(scenario, 10.0, 0).unwrap();
    let w = &mut Vec::new();
    let spec = RuleBackend.formulate(&task, &theta, w).unwrap();
    let strategy = RuleBackend.select_strategy(&spec, w).unwrap();
    let prompt = RuleBackend.upsample(&theta, &spec, &strategy, w).unwrap();
    let plan = RuleBackend.generate_plan(&prompt, w).unwrap();
    vec![
        serde_json::to_string(&spec).unwrap(),
        serde_json::to_string(&strategy).unwrap(),
        serde_json::to_string(&prompt).unwrap(),
        serde_json::to_string(&plan).unwrap(),
    ]
}

#[test]
fn valid_replies_drive_a_full_run() {
    let t = Scripted::new(fixture(1).iter().map(|s| chat(s)).collect());
    let backend = RemoteBackend::new(client(t.clone()));
    let (task, theta) = instantiate_scenario(1, 10.0, 0).unwrap();
    let run = run_pipeline(&task, &theta, &PipelineConfig::default(), &backend);
    assert_eq!(run.result.terminated_by, TerminatedBy::Accepted);
    assert!(run.result.warnings.is_empty(), "{:?}", run.result.warnings);

    let requests = t.requests.lock().unwrap();
    assert_eq!(requests.len(), 4);
    for (req, stage) in requests
        .iter()
        .zip(["formulate", "select_strategy", "upsample", "generate_plan"])
    {
        assert_eq!(req["model"], "test-model");
        assert_eq!(req["response_format"]["type"], "json_schema");
        assert_eq!(req["response_format"]["json_schema"]["name"], stage);
        assert_eq!(req["messages"][0]["role"], "system");
    }
}

#[test]
fn malformed_replies_end_in_schema_violation() {
    let t = Scripted::new(vec![chat("not json"), chat("{\"variables\": []}"), chat("{}")]);
    let backend = RemoteBackend::new(client(t.clone()));
    let (task, theta) = instantiate_scenario(1, 10.0, 0).unwrap();
    let mut warnings = Vec::new();
    let err = backend.formulate(&task, &theta, &mut warnings).unwrap_err();
    assert!(matches!(err, PipelineError::SchemaViolation(_)), "{err}");
    assert_eq!(warnings.len(), 3);
    // each retry carries the previous rejection back to the model
    let requests = t.requests.lock().unwrap();
    assert_eq!(requests.len(), 3);
    assert_eq!(requests[2]["messages"].as_array().unwrap().len(), 6);
}

#[test]
fn unknown_fields_are_rejected() {
    let mut spec: Value = serde_json::from_str(&fixture(6)[0]).unwrap();
    spec["script"] = json!("import os");
    let t = Scripted::new(vec![chat(&spec.to_string()); 3]);
    let (task, theta) = instantiate_scenario(6, 10.0, 0).unwrap();
    let err = RemoteBackend::new(client(t))
        .formulate(&task, &theta, &mut Vec::new())
        .unwrap_err();
    assert!(err.to_string().contains("unknown field"), "{err}");
}

#[test]
fn semantic_mismatch_is_retried() {
    // a well-formed spec for scenario 6 is wrong for scenario 1
    let wrong = fixture(6)[0].clone();
    let right = fixture(1)[0].clone();
    let t = Scripted::new(vec![chat(&wrong), chat(&right)]);
    let (task, theta) = instantiate_scenario(1, 10.0, 0).unwrap();
    let mut warnings = Vec::new();
    let spec: ProblemSpec = RemoteBackend::new(client(t))
        .formulate(&task, &theta, &mut warnings)
        .unwrap();
    spec.validate_against(&theta).unwrap();
    assert_eq!(warnings.len(), 1);
}

#[test]
fn timeout_and_http_errors_surface() {
    let (task, theta) = instantiate_scenario(1, 10.0, 0).unwrap();
    let t = Scripted::new(vec![Err(TransportError::Timeout)]);
    let err = RemoteBackend::new(client(t))
        .formulate(&task, &theta, &mut Vec::new())
        .unwrap_err();
    assert!(matches!(err, PipelineError::Timeout(60)));

    let t = Scripted::new(vec![Err(TransportError::Http("503".into()))]);
    let err = RemoteBackend::new(client(t))
        .formulate(&task, &theta, &mut Vec::new())
        .unwrap_err();
    assert!(matches!(err, PipelineError::HttpError(_)));

    // a stage failure ends the run without panicking
    let t = Scripted::new(vec![Err(TransportError::Timeout)]);
    let run = run_pipeline(
        &task,
        &theta,
        &PipelineConfig::default(),
        &RemoteBackend::new(client(t)),
    );
    assert_eq!(run.result.terminated_by, TerminatedBy::Unrecoverable);
    assert!(run.result.spec.is_none());
}

#[test]
fn bad_plans_fall_back_to_rules() {
    let f = fixture(8);
    let mut bad_plan: Value = serde_json::from_str(&f[3]).unwrap();
    bad_plan["postprocessing"] = json!(["rm -rf /"]);
    let bad = bad_plan.to_string();
    let t = Scripted::new(vec![
        chat(&f[0]),
        chat(&f[1]),
        chat(&f[2]),
        chat(&bad),
        chat(&bad),
        chat(&bad),
    ]);
    let (task, theta) = instantiate_scenario(8, 10.0, 0).unwrap();
    let run = run_pipeline(
        &task,
        &theta,
        &PipelineConfig::default(),
        &RemoteBackend::new(client(t)),
    );
    assert_eq!(run.result.terminated_by, TerminatedBy::Accepted);
    assert!(run
        .result
        .warnings
        .iter()
        .any(|w| w.contains("fell back to the rule backend")));
    assert_eq!(run.result.plans[0].postprocessing, Vec::<String>::new());
}

#[test]
fn missing_settings_fail_before_any_request() {
    assert!(matches!(
        RemoteConfig::new(Some("http://x".into()), Some("m".into()), None),
        Err(PipelineError::Config(_))
    ));
    assert!(matches!(
        RemoteConfig::new(None, Some("m".into()), Some("k".into())),
        Err(PipelineError::Config(_))
    ));
}

/// Counts concurrent calls and never lets more than the cap through.
struct Slow {
    inflight: AtomicUsize,
    peak: AtomicUsize,
    reply: String,
}

impl Transport for Slow {
    fn post_json(&self, _: &str, _: &str, _: &Value, _: Duration) -> Result<String, TransportError> {
        let now = self.inflight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(20));
        self.inflight.fetch_sub(1, Ordering::SeqCst);
        chat(&self.reply)
    }
}

#[test]
fn inflight_requests_are_capped() {
    let slow = Arc::new(Slow {
        inflight: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
        reply: fixture(1)[1].clone(),
    });
    let mut cfg = RemoteConfig::new(Some("http://x".into()), Some("m".into()), Some("k".into())).unwrap();
    cfg.max_inflight = 2;
    let c = LlmClient::new(cfg, slow.clone());
    std::thread::scope(|s| {
        for _ in 0..8 {
            let c = c.clone();
            s.spawn(move || {
                let r: precoding_core::solvers::SolverStrategy = c
                    .llm_complete(RemoteStage::SelectStrategy, "{}", |_| Ok(()), &mut Vec::new())
                    .unwrap();
                r
            });
        }
    });
    assert!(slow.peak.load(Ordering::SeqCst) <= 2);
}

#[test]
fn rule_backend_makes_no_requests() {
    // the rule backend has no transport at all; a run must not need one
    let (task, theta) = instantiate_scenario(4, 10.0, 0).unwrap();
    let run = run_pipeline(&task, &theta, &PipelineConfig::default(), &RuleBackend);
    assert_eq!(run.transcript.run_input().unwrap().backend, "rule");
}
