//! Run configuration: a TOML file of dotted keys, then environment
//! overrides, then command-line flags.
//!
//! ```toml
//! backend = "rule"                 # or "remote"
//! llm.base_url = "https://host/v1"
//! llm.model = "some-model"
//! llm.timeout_s = 60
//! llm.max_inflight = 4
//! sweep.n_mc = 100
//! sweep.seed = 0
//! sweep.snrs_db = [0, 5, 10, 15, 20, 25]
//! paths.transcript_dir = "runs"
//! paths.report_dir = "reports"
//! tolerances.feasibility_tol = 1e-6
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use precoding_harness::DEFAULT_SNRS_DB;
use precoding_pipeline::remote::{RemoteConfig, API_KEY_ENV};
use precoding_pipeline::{ExecOptions, PipelineConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Rule,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub timeout_s: u64,
    pub max_inflight: usize,
    pub max_attempts: u32,
}

impl Default for LlmSection {
    fn default() -> Self {
        Self {
            base_url: None,
            model: None,
            timeout_s: 60,
            max_inflight: 4,
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_mc: usize,
    pub seed: u64,
    pub snrs_db: Vec<f64>,
    pub scenarios: Vec<u32>,
    /// `baselines`, `pipeline`, baseline ids or solver names.
    pub methods: Vec<String>,
    pub jobs: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n_mc: 100,
            seed: 0,
            snrs_db: DEFAULT_SNRS_DB.to_vec(),
            scenarios: (1..=9).collect(),
            methods: vec!["baselines".into(), "pipeline".into()],
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub transcript_dir: PathBuf,
    pub report_dir: PathBuf,
    /// JSON array of catalog entries merged over the built-in nine.
    pub catalog: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            transcript_dir: "runs".into(),
            report_dir: "reports".into(),
            catalog: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolerancesSection {
    pub feasibility_tol: f64,
}

impl Default for TolerancesSection {
    fn default() -> Self {
        Self {
            feasibility_tol: precoding_core::metrics::DEFAULT_FEASIBILITY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub t_max: u32,
    pub objective_quality_check: bool,
    pub wall_time_cap_s: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        Self {
            t_max: d.t_max,
            objective_quality_check: d.objective_quality_check,
            wall_time_cap_s: d.exec.wall_time_cap_s,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub llm: LlmSection,
    pub sweep: SweepSection,
    pub paths: PathsSection,
    pub tolerances: TolerancesSection,
    pub pipeline: PipelineSection,
}

fn config_error(m: impl Into<String>) -> CliError {
    CliError::Config(m.into())
}

impl RunConfig {
    /// Reads `path` if given, then applies `AGENTIC_BACKEND`,
    /// `AGENTIC_LLM_BASE_URL` and `AGENTIC_LLM_MODEL` from `env`.
    pub fn load(path: Option<&Path>, env: &HashMap<String, String>) -> Result<Self, CliError> {
        let mut config: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))?
            }
        };
        if let Some(b) = env.get("AGENTIC_BACKEND") {
            config.backend = match b.as_str() {
                "rule" => BackendKind::Rule,
                "remote" => BackendKind::Remote,
                other => {
                    return Err(config_error(format!(
                        "AGENTIC_BACKEND must be rule or remote, not `{other}`"
                    )))
                }
            };
        }
        if let Some(u) = env.get("AGENTIC_LLM_BASE_URL") {
            config.llm.base_url = Some(u.clone());
        }
        if let Some(m) = env.get("AGENTIC_LLM_MODEL") {
            config.llm.model = Some(m.clone());
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.sweep.n_mc == 0 {
            return Err(config_error("sweep.n_mc must be at least 1"));
        }
        if self.sweep.jobs == Some(0) {
            return Err(config_error("sweep.jobs must be at least 1"));
        }
        if !(self.tolerances.feasibility_tol.is_finite() && self.tolerances.feasibility_tol >= 0.0) {
            return Err(config_error("tolerances.feasibility_tol must be a non-negative number"));
        }
        if !(self.pipeline.wall_time_cap_s.is_finite() && self.pipeline.wall_time_cap_s > 0.0) {
            return Err(config_error("pipeline.wall_time_cap_s must be positive"));
        }
        if self.llm.timeout_s == 0 || self.llm.max_inflight == 0 || self.llm.max_attempts == 0 {
            return Err(config_error(
                "llm.timeout_s, llm.max_inflight and llm.max_attempts must be positive",
            ));
        }
        if self.backend == BackendKind::Remote {
            for (v, key) in [(&self.llm.base_url, "llm.base_url"), (&self.llm.model, "llm.model")] {
                if v.as_deref().is_none_or(|s| s.trim().is_empty()) {
                    return Err(config_error(format!("remote backend requires {key}")));
                }
            }
        }
        Ok(())
    }

    pub fn pipeline_config(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            t_max: self.pipeline.t_max,
            objective_quality_check: self.pipeline.objective_quality_check,
            exec: ExecOptions {
                feasibility_tol: self.tolerances.feasibility_tol,
                wall_time_cap_s: self.pipeline.wall_time_cap_s,
                seed,
            },
            fault: None,
        }
    }

    /// Remote settings; the key comes from the environment only.
    pub fn remote_config(&self, env: &HashMap<String, String>) -> Result<RemoteConfig, CliError> {
        let mut rc = RemoteConfig::new(
            self.llm.base_url.clone(),
            self.llm.model.clone(),
            env.get(API_KEY_ENV).cloned(),
        )
        .map_err(|e| config_error(e.to_string()))?;
        rc.timeout = Duration::from_secs(self.llm.timeout_s);
        rc.max_inflight = self.llm.max_inflight;
        rc.max_attempts = self.llm.max_attempts;
        Ok(rc)
    }
}

/// Creates `dir` if needed, reporting failure as a configuration error.
pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| config_error(format!("cannot create {}: {e}", dir.display())))
}
