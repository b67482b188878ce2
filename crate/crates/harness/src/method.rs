//! Methods a sweep can compare.

use std::fmt;
use std::sync::Arc;

use precoding_core::baselines::{baselines_for, run_baseline, BaselineKind};
use precoding_core::model::Solution;
use precoding_core::scenarios::{Family, ScenarioDescriptor, TaskDescription};
use precoding_core::solvers::{registry_lookup, solve, SolveOptions, SolverError, SolverStrategy, StrategyId};
use precoding_pipeline::{run_pipeline, PipelineConfig, RuleBackend};

use crate::error::HarnessError;

/// Report name of the rule-backend pipeline.
pub const PIPELINE_METHOD_NAME: &str = "AgenticPrecoding";

type CustomFn = dyn Fn(&ScenarioDescriptor, u64) -> Option<Solution> + Send + Sync;

/// A user-supplied method, for ablations and tests.
#[derive(Clone)]
pub struct CustomMethod {
    pub name: String,
    pub run: Arc<CustomFn>,
}

impl CustomMethod {
    pub fn new(
        name: impl Into<String>,
        run: impl Fn(&ScenarioDescriptor, u64) -> Option<Solution> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            run: Arc::new(run),
        }
    }
}

impl fmt::Debug for CustomMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMethod")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Method {
    Baseline(BaselineKind),
    /// A registered solver run with its default hyperparameters.
    Solver(StrategyId),
    /// The full workflow with the rule backend.
    Pipeline,
    Custom(CustomMethod),
}

impl Method {
    pub fn name(&self, family: Family) -> String {
        match self {
            Method::Baseline(k) => k.label(family).to_string(),
            Method::Solver(id) => id.name().to_string(),
            Method::Pipeline => PIPELINE_METHOD_NAME.to_string(),
            Method::Custom(c) => c.name.clone(),
        }
    }

    pub fn applies_to(&self, family: Family) -> bool {
        match self {
            Method::Baseline(k) => baselines_for(family).contains(k),
            Method::Solver(id) => {
                let data_ok = match id {
                    StrategyId::FdPowerMin => family == Family::FullDuplexPowerMin,
                    StrategyId::CrSumRateProjAscent | StrategyId::CrRobustSumRate => {
                        matches!(family, Family::CognitiveSumRate | Family::CognitiveRobustSumRate)
                    }
                    _ => true,
                };
                data_ok
                    && registry_lookup(*id)
                        .is_ok_and(|h| h.objective == family.objective() && h.architecture == family.architecture())
            }
            Method::Pipeline | Method::Custom(_) => true,
        }
    }

    /// Produces a solution, or `None` when the method fails on this
    /// instance. A solver that stops at its iteration limit still
    /// contributes its last iterate.
    pub fn run(
        &self,
        task: &TaskDescription,
        theta: &ScenarioDescriptor,
        seed: u64,
        pipeline: &PipelineConfig,
    ) -> Option<Solution> {
        match self {
            Method::Baseline(k) => run_baseline(*k, theta, seed).ok(),
            Method::Solver(id) => {
                let opts = SolveOptions {
                    seed,
                    ..SolveOptions::new(SolverStrategy::with_defaults(*id).ok()?.hyperparams)
                };
                match solve(*id, theta, &opts) {
                    Ok(o) => Some(o.solution),
                    Err(SolverError::NotConverged { outcome }) => Some(outcome.solution),
                    Err(_) => None,
                }
            }
            Method::Pipeline => {
                let mut config = pipeline.clone();
                config.exec.seed = seed;
                run_pipeline(task, theta, &config, &RuleBackend).result.final_solution
            }
            Method::Custom(c) => (c.run)(theta, seed),
        }
    }
}

/// A method, or the whole baseline set of each scenario's family.
#[derive(Debug, Clone)]
pub enum MethodSelector {
    AllBaselines,
    One(Method),
}

impl MethodSelector {
    /// Parses `baselines`, `pipeline`, a baseline id such as `zf`, or a
    /// solver name such as `WmmseSumRate`.
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        let s = s.trim();
        match s {
            "baselines" => Ok(Self::AllBaselines),
            "pipeline" => Ok(Self::One(Method::Pipeline)),
            _ => BaselineKind::parse(s)
                .map(Method::Baseline)
                .or_else(|| StrategyId::parse(s).map(Method::Solver))
                .map(Self::One)
                .ok_or_else(|| HarnessError::UnknownMethod(s.to_string())),
        }
    }

    /// Methods for one family, in selection order, skipping those that do
    /// not apply.
    pub fn expand(selectors: &[MethodSelector], family: Family) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for sel in selectors {
            let candidates = match sel {
                MethodSelector::AllBaselines => baselines_for(family).iter().map(|k| Method::Baseline(*k)).collect(),
                MethodSelector::One(m) => vec![m.clone()],
            };
            for m in candidates {
                if m.applies_to(family) && !out.iter().any(|o| o.name(family) == m.name(family)) {
                    out.push(m);
                }
            }
        }
        out
    }
}
