//! Remote language-model backend.
//!
//! Each stage sends one chat request whose reply must be JSON matching the
//! stage's published schema. Replies are parsed with unknown fields
//! rejected and then checked semantically; a rejected reply is retried with
//! the validation error appended, up to the attempt budget. Model output is
//! only ever deserialized into plain data: nothing it returns is executed.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use precoding_core::scenarios::{ScenarioDescriptor, TaskDescription};
use precoding_core::solvers::SolverStrategy;

use crate::backend::StageBackend;
use crate::error::PipelineError;
use crate::rules::{generate_plan_rule, render_source};
use crate::types::{ImplementationPrompt, ProblemSpec, SolverPlan};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "AGENTIC_LLM_API_KEY";

/// Stage JSON schemas shipped with the crate.
pub mod schemas {
    pub const PROBLEM_SPEC: &str = include_str!("../schemas/problem_spec.json");
    pub const SOLVER_STRATEGY: &str = include_str!("../schemas/solver_strategy.json");
    pub const IMPLEMENTATION_PROMPT: &str = include_str!("../schemas/implementation_prompt.json");
    pub const SOLVER_PLAN: &str = include_str!("../schemas/solver_plan.json");
}

/// Versioned system prompts, one per stage.
pub mod prompts {
    pub const FORMULATE: &str = include_str!("../prompts/formulate.txt");
    pub const SELECT_STRATEGY: &str = include_str!("../prompts/select_strategy.txt");
    pub const UPSAMPLE: &str = include_str!("../prompts/upsample.txt");
    pub const GENERATE_PLAN: &str = include_str!("../prompts/generate_plan.txt");
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemoteStage {
    Formulate,
    SelectStrategy,
    Upsample,
    GeneratePlan,
}

impl RemoteStage {
    pub fn name(self) -> &'static str {
        match self {
            RemoteStage::Formulate => "formulate",
            RemoteStage::SelectStrategy => "select_strategy",
            RemoteStage::Upsample => "upsample",
            RemoteStage::GeneratePlan => "generate_plan",
        }
    }

    pub fn system_prompt(self) -> &'static str {
        match self {
            RemoteStage::Formulate => prompts::FORMULATE,
            RemoteStage::SelectStrategy => prompts::SELECT_STRATEGY,
            RemoteStage::Upsample => prompts::UPSAMPLE,
            RemoteStage::GeneratePlan => prompts::GENERATE_PLAN,
        }
    }

    pub fn schema(self) -> &'static str {
        match self {
            RemoteStage::Formulate => schemas::PROBLEM_SPEC,
            RemoteStage::SelectStrategy => schemas::SOLVER_STRATEGY,
            RemoteStage::Upsample => schemas::IMPLEMENTATION_PROMPT,
            RemoteStage::GeneratePlan => schemas::SOLVER_PLAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Chat endpoint base; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
    /// Concurrent in-flight requests allowed across all runs sharing the
    /// client.
    pub max_inflight: usize,
    /// Attempts per stage before a schema violation is final.
    pub max_attempts: u32,
}

impl RemoteConfig {
    /// Builds a configuration, failing before any network activity when a
    /// required value is missing.
    pub fn new(
        base_url: Option<String>,
        model: Option<String>,
        api_key: Option<String>,
    ) -> Result<Self, PipelineError> {
        let need = |v: Option<String>, what: &str| {
            v.filter(|s| !s.trim().is_empty())
                .ok_or_else(|| PipelineError::Config(format!("remote backend requires {what}")))
        };
        Ok(Self {
            base_url: need(base_url, "llm.base_url")?,
            model: need(model, "llm.model")?,
            api_key: need(api_key, API_KEY_ENV)?,
            timeout: Duration::from_secs(60),
            max_inflight: 4,
            max_attempts: 3,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Http(String),
}

/// One HTTP POST with a JSON body, returning the response body.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: &str, body: &Value, timeout: Duration) -> Result<String, TransportError>;
}

/// Blocking HTTP transport.
#[derive(Debug, Default)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, bearer: &str, body: &Value, timeout: Duration) -> Result<String, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let response = agent
            .post(url)
            .header("Authorization", &format!("Bearer {bearer}"))
            .send_json(body)
            .map_err(map_ureq)?;
        response.into_body().read_to_string().map_err(map_ureq)
    }
}

fn map_ureq(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Http(other.to_string()),
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.gate.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.gate.cv.notify_one();
    }
}

/// Chat client shared by any number of runs.
#[derive(Clone)]
pub struct LlmClient {
    config: RemoteConfig,
    transport: Arc<dyn Transport>,
    gate: Arc<Gate>,
}

impl LlmClient {
    pub fn new(config: RemoteConfig, transport: Arc<dyn Transport>) -> Self {
        let gate = Arc::new(Gate::new(config.max_inflight));
        Self {
            config,
            transport,
            gate,
        }
    }

    fn extract_content(body: &str) -> Result<String, String> {
        let v: Value = serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }

    /// Sends one stage request and returns the validated reply. Rejected
    /// replies are retried with the reason appended; each rejection is noted
    /// in `warnings`.
    pub fn llm_complete<T: DeserializeOwned>(
        &self,
        stage: RemoteStage,
        payload: &str,
        validate: impl Fn(&T) -> Result<(), PipelineError>,
        warnings: &mut Vec<String>,
    ) -> Result<T, PipelineError> {
        let schema: Value = serde_json::from_str(stage.schema()).expect("shipped schemas are valid JSON");
        let mut messages = vec![
            json!({ "role": "system", "content": stage.system_prompt() }),
            json!({ "role": "user", "content": payload }),
        ];
        let mut last_error = String::new();
        for attempt in 1..=self.config.max_attempts {
            let body = json!({
                "model": self.config.model,
                "messages": messages,
                "response_format": {
                    "type": "json_schema",
                    "json_schema": { "name": stage.name(), "strict": true, "schema": schema },
                },
            });
            let reply = {
                let _slot = self.gate.acquire();
                self.transport.post_json(
                    &self.config.endpoint(),
                    &self.config.api_key,
                    &body,
                    self.config.timeout,
                )
            };
            let raw = match reply {
                Ok(r) => r,
                Err(TransportError::Timeout) => return Err(PipelineError::Timeout(self.config.timeout.as_secs())),
                Err(TransportError::Http(m)) => return Err(PipelineError::HttpError(m)),
            };
            let parsed = Self::extract_content(&raw).and_then(|content| {
                let value: T =
                    serde_json::from_str(&content).map_err(|e| format!("reply does not match schema: {e}"))?;
                validate(&value).map_err(|e| e.to_string())?;
                Ok((content, value))
            });
            match parsed {
                Ok((_, value)) => return Ok(value),
                Err(e) => {
                    warnings.push(format!("{} attempt {attempt} rejected: {e}", stage.name()));
                    messages.push(json!({ "role": "assistant", "content": raw }));
                    messages.push(json!({
                        "role": "user",
                        "content": format!("Your previous reply was rejected: {e}. Reply again with only JSON that matches the schema exactly."),
                    }));
                    last_error = e;
                }
            }
        }
        Err(PipelineError::SchemaViolation(format!(
            "{} failed after {} attempts: {last_error}",
            stage.name(),
            self.config.max_attempts
        )))
    }
}

fn payload<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("stage payloads serialize")
}

/// Backend whose stages are answered by a remote model.
#[derive(Clone)]
pub struct RemoteBackend {
    client: LlmClient,
}

impl RemoteBackend {
    pub fn new(client: LlmClient) -> Self {
        Self { client }
    }
}

impl StageBackend for RemoteBackend {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn formulate(
        &self,
        task: &TaskDescription,
        theta: &ScenarioDescriptor,
        warnings: &mut Vec<String>,
    ) -> Result<ProblemSpec, PipelineError> {
        let body = payload(&json!({ "task": task.text, "descriptor": theta }));
        self.client.llm_complete(
            RemoteStage::Formulate,
            &body,
            |s: &ProblemSpec| s.validate_against(theta),
            warnings,
        )
    }

    fn select_strategy(&self, spec: &ProblemSpec, warnings: &mut Vec<String>) -> Result<SolverStrategy, PipelineError> {
        self.client.llm_complete(
            RemoteStage::SelectStrategy,
            &payload(spec),
            |s: &SolverStrategy| s.validate().map_err(|e| PipelineError::SchemaViolation(e.to_string())),
            warnings,
        )
    }

    fn upsample(
        &self,
        theta: &ScenarioDescriptor,
        spec: &ProblemSpec,
        strategy: &SolverStrategy,
        warnings: &mut Vec<String>,
    ) -> Result<ImplementationPrompt, PipelineError> {
        let body = payload(&json!({
            "system": theta.sys,
            "sigma2": theta.ch.sigma2,
            "spec": spec,
            "strategy": strategy,
        }));
        self.client
            .llm_complete(RemoteStage::Upsample, &body, ImplementationPrompt::validate, warnings)
    }

    /// Falls back to the rule generator when the model cannot produce a
    /// valid plan within the attempt budget.
    fn generate_plan(
        &self,
        prompt: &ImplementationPrompt,
        warnings: &mut Vec<String>,
    ) -> Result<SolverPlan, PipelineError> {
        let remote = self.client.llm_complete(
            RemoteStage::GeneratePlan,
            &payload(prompt),
            SolverPlan::validate,
            warnings,
        );
        let mut plan = match remote {
            Ok(p) => p,
            Err(PipelineError::SchemaViolation(e)) => {
                warnings.push(format!("generate_plan fell back to the rule backend: {e}"));
                generate_plan_rule(prompt)?
            }
            Err(e) => return Err(e),
        };
        plan.revision = 0;
        plan.rendered_source = Some(render_source(&plan));
        Ok(plan)
    }
}
