//! Deterministic rule backend: table-driven formulation, strategy
//! selection, prompt writing and plan generation.

use std::fmt::Write as _;

use precoding_core::model::{Architecture, ConstraintKind, ObjectiveKind};
use precoding_core::scenarios::{ScenarioDescriptor, TaskDescription};
use precoding_core::solvers::{registry_lookup, Hyperparams, SolverStrategy, StrategyId};

use crate::backend::StageBackend;
use crate::error::PipelineError;
use crate::types::Direction;
use crate::types::{
    AnnotatedConstraint, Coupling, DomainTag, ImplementationPrompt, ObjectiveSpec, PlanStep, ProblemSpec,
    PromptSection, SolverPlan, Variable, PROMPT_SECTIONS,
};

/// Convexity and coupling of a constraint kind on a given transmitter.
///
/// Hardware alphabets are nonconvex; a CI margin is linear in the transmit
/// vector and so convex on its own, but nonconvex once the vector is tied to
/// a hardware alphabet or an analog network. Rate and SINR targets admit a
/// second-order-cone reformulation and count as convex.
pub fn annotate(kind: ConstraintKind, architecture: Architecture) -> (bool, Coupling) {
    use ConstraintKind::*;
    match kind {
        UnitModulus | OneBit => (false, Coupling::PerAntenna),
        CiMargin | RobustCiMargin => (architecture == Architecture::FullyDigital, Coupling::PerUser),
        PerUserRate | PerUserSinr => (true, Coupling::PerUser),
        TotalPower | InterferenceTemperature | RobustInterferenceTemperature | SelfInterference | EavesdropperRate => {
            (true, Coupling::Joint)
        }
    }
}

fn variables_for(theta: &ScenarioDescriptor) -> Vec<Variable> {
    let n_t = theta.n_t();
    let var = |name: &str, shape: Vec<usize>, domain| Variable {
        name: name.to_string(),
        shape,
        domain,
    };
    match theta.sys.architecture {
        Architecture::FullyDigital => vec![var("W", vec![n_t, theta.stream_count()], DomainTag::Complex)],
        Architecture::ConstantEnvelope => vec![var("theta", vec![n_t], DomainTag::Phase)],
        Architecture::OneBit => vec![var("x", vec![n_t], DomainTag::OneBitAlphabet)],
        Architecture::Hybrid => {
            let n_rf = theta.sys.n_rf.unwrap_or(n_t);
            vec![
                var("F_RF", vec![n_t, n_rf], DomainTag::UnitModulus),
                var("F_BB", vec![n_rf, theta.k()], DomainTag::Complex),
            ]
        }
    }
}

fn metric_label(kind: ObjectiveKind) -> &'static str {
    match kind {
        ObjectiveKind::PowerMin => "power_w",
        ObjectiveKind::CiMarginMax => "normalized_margin",
        ObjectiveKind::SecrecyMaxMin => "secrecy_rate",
        ObjectiveKind::SumRateMax => "sum_rate",
    }
}

/// Rule formulation of a descriptor.
pub fn formulate_rule(task: &TaskDescription, theta: &ScenarioDescriptor) -> ProblemSpec {
    let arch = theta.sys.architecture;
    let constraints = theta
        .con
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let (convex, coupling) = annotate(c.kind, arch);
            AnnotatedConstraint {
                index,
                constraint: c.clone(),
                convex,
                coupling,
            }
        })
        .collect();
    ProblemSpec {
        variables: variables_for(theta),
        objective: ObjectiveSpec {
            kind: theta.obj,
            direction: if theta.obj.is_minimization() {
                Direction::Min
            } else {
                Direction::Max
            },
            expression_id: metric_label(theta.obj).to_string(),
        },
        constraints,
        notes: task.text.clone(),
    }
}

/// Strategies applicable to `spec`, best first.
///
/// | objective    | transmitter       | condition                   | ranking                          |
/// |--------------|-------------------|-----------------------------|----------------------------------|
/// | PowerMin     | fully digital     | self-interference limit     | FdPowerMin, SinrDualityPowerMin  |
/// | PowerMin     | fully digital     | otherwise                   | SinrDualityPowerMin              |
/// | PowerMin     | hybrid            |                             | HybridRobustCiAltMin             |
/// | CiMarginMax  | constant envelope |                             | CePhaseCoordinateDescent         |
/// | CiMarginMax  | 1-bit             |                             | OneBitGreedyCD                   |
/// | SecrecyMaxMin| fully digital     |                             | SecrecyNullspaceMaxMin           |
/// | SumRateMax   | fully digital     | robust                      | CrRobustSumRate                  |
/// | SumRateMax   | fully digital     | interference limit          | CrSumRateProjAscent, CrRobustSumRate |
/// | SumRateMax   | fully digital     | otherwise                   | WmmseSumRate, CrSumRateProjAscent |
pub fn ranked_strategies(spec: &ProblemSpec) -> Result<Vec<StrategyId>, PipelineError> {
    use StrategyId::*;
    let arch = spec
        .architecture()
        .ok_or_else(|| PipelineError::NoApplicableStrategy("variables name no known transmitter".into()))?;
    let robust = spec.is_robust();
    let ranked = match (spec.objective.kind, arch) {
        (ObjectiveKind::PowerMin, Architecture::FullyDigital) if spec.has(ConstraintKind::SelfInterference) => {
            vec![FdPowerMin, SinrDualityPowerMin]
        }
        (ObjectiveKind::PowerMin, Architecture::FullyDigital) => vec![SinrDualityPowerMin],
        (ObjectiveKind::PowerMin, Architecture::Hybrid) => vec![HybridRobustCiAltMin],
        (ObjectiveKind::CiMarginMax, Architecture::ConstantEnvelope) => vec![CePhaseCoordinateDescent],
        (ObjectiveKind::CiMarginMax, Architecture::OneBit) => vec![OneBitGreedyCD],
        (ObjectiveKind::SecrecyMaxMin, Architecture::FullyDigital) => vec![SecrecyNullspaceMaxMin],
        (ObjectiveKind::SumRateMax, Architecture::FullyDigital) if robust => vec![CrRobustSumRate],
        (ObjectiveKind::SumRateMax, Architecture::FullyDigital)
            if spec.has(ConstraintKind::InterferenceTemperature) =>
        {
            vec![CrSumRateProjAscent, CrRobustSumRate]
        }
        (ObjectiveKind::SumRateMax, Architecture::FullyDigital) => vec![WmmseSumRate, CrSumRateProjAscent],
        (kind, arch) => {
            return Err(PipelineError::NoApplicableStrategy(format!(
                "{kind:?} on a {arch:?} transmitter"
            )));
        }
    };
    Ok(ranked)
}

/// Preprocessing a strategy starts with by default.
pub fn default_preprocessing(id: StrategyId) -> Vec<String> {
    match id {
        StrategyId::CePhaseCoordinateDescent | StrategyId::OneBitGreedyCD => vec![
            PlanStep::MrtCompositeInit.to_string(),
            PlanStep::ZfCompositeInit.to_string(),
        ],
        _ => Vec::new(),
    }
}

fn steps_line(steps: &[String]) -> String {
    if steps.is_empty() {
        "none".into()
    } else {
        steps.join(", ")
    }
}

fn algorithm_outline(id: StrategyId) -> &'static str {
    use StrategyId::*;
    match id {
        SinrDualityPowerMin => "1. Iterate the uplink power fixed point until the sum changes by less than tol.\n2. Form MMSE receive directions and reuse them as downlink beamformers.\n3. Solve the linear system that meets every SINR target with equality.",
        FdPowerMin => "1. Fold the self-interference channel into the noise covariance with multiplier mu.\n2. Run the duality fixed point for the current mu.\n3. Raise mu geometrically, then bisect, until leakage meets its limit.",
        CePhaseCoordinateDescent => "1. Start from the projected composite.\n2. Sweep antennas; per antenna search a phase grid and refine by golden section.\n3. Keep strict improvements of the worst-user margin; stop when a sweep gains less than tol.",
        OneBitGreedyCD => "1. Quantize the composite to the 1-bit alphabet.\n2. Per antenna try the four alphabet points and keep strict improvements.\n3. Stop when a full sweep changes nothing.",
        SecrecyNullspaceMaxMin => "1. Project user channels onto the eavesdropper null space.\n2. Linearize the worst-user gain around the current point and solve the convex subproblem.\n3. Repeat from several starts and keep the best worst-user rate.",
        CrSumRateProjAscent | CrRobustSumRate => "1. Start from the best projected linear precoder.\n2. Take gradient steps on the sum rate with backtracking.\n3. Project onto the power budget and the interference cap after each step.",
        WmmseSumRate => "1. Update MMSE receivers for the current beamformers.\n2. Update the MSE weights.\n3. Update beamformers by a regularized inverse with the multiplier bisected to meet the budget.",
        HybridRobustCiAltMin => "1. Initialize the analog network by phase matching.\n2. Solve the digital power minimization exactly for the current analog network.\n3. Sweep analog phases, keeping changes that lower power; stop on small relative change.",
        SemidefiniteRelaxation => "Reserved; not executable.",
    }
}

fn describe_solution(arch: Architecture) -> &'static str {
    match arch {
        Architecture::FullyDigital => "Output: complex beamformer matrix W with one column per stream.",
        Architecture::ConstantEnvelope => {
            "Output: phase vector theta in radians; the transmitter radiates sqrt(P/N_t) exp(j theta_n)."
        }
        Architecture::OneBit => "Output: transmit vector x with entries a(+-1 +- j).",
        Architecture::Hybrid => "Output: analog matrix F_RF with unit-modulus entries and baseband matrix F_BB.",
    }
}

/// Rule prompt for a (descriptor, spec, strategy) triple.
pub fn upsample_rule(
    theta: &ScenarioDescriptor,
    spec: &ProblemSpec,
    strategy: &SolverStrategy,
) -> ImplementationPrompt {
    let mut variables = String::new();
    for v in &spec.variables {
        let dims: Vec<String> = v.shape.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(variables, "- {}: {} ({:?})", v.name, dims.join("x"), v.domain);
    }
    let objective = format!(
        "{} {} ({:?})",
        match spec.objective.direction {
            Direction::Min => "minimize",
            Direction::Max => "maximize",
        },
        spec.objective.expression_id,
        spec.objective.kind
    );
    let mut constraints = String::new();
    let mut checks = String::new();
    for c in &spec.constraints {
        let params: Vec<String> = c
            .constraint
            .parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let _ = writeln!(
            constraints,
            "- [{}] {} {} (convex: {}, coupling: {:?})",
            c.index,
            c.constraint.kind,
            params.join(" "),
            c.convex,
            c.coupling
        );
        let _ = writeln!(
            checks,
            "- [{}] {}: violation max(0, lhs - rhs) within relative tolerance 1e-6",
            c.index, c.constraint.kind
        );
    }
    let id = strategy.strategy_id;
    let summary = registry_lookup(id).map(|h| h.summary).unwrap_or("unregistered");
    let steps = format!(
        "strategy: {id}\nmethod: {summary}\npreprocess: {}\npostprocess: none\n{}",
        steps_line(&default_preprocessing(id)),
        algorithm_outline(id)
    );
    let mut settings = String::new();
    for (k, v) in strategy.hyperparam_map() {
        let _ = writeln!(settings, "{k} = {v}");
    }
    let io = format!(
        "Input: scenario {} with N_t={}, K={}, sigma2={}.\n{}",
        theta.sys.scenario_id,
        theta.n_t(),
        theta.k(),
        theta.ch.sigma2,
        describe_solution(theta.sys.architecture)
    );
    let bodies = [variables, objective, constraints, steps, settings, io, checks];
    ImplementationPrompt {
        sections: PROMPT_SECTIONS
            .iter()
            .zip(bodies)
            .map(|(h, b)| PromptSection {
                heading: h.to_string(),
                body: b.trim_end().to_string(),
            })
            .collect(),
    }
}

fn parse_steps(value: &str) -> Vec<String> {
    if value.trim() == "none" {
        return Vec::new();
    }
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Rule plan generation: reads the strategy, step lists and numerical
/// settings back out of the prompt text.
pub fn generate_plan_rule(prompt: &ImplementationPrompt) -> Result<SolverPlan, PipelineError> {
    prompt.validate()?;
    let bad = |m: String| PipelineError::SchemaViolation(m);
    let steps = prompt.section("Algorithmic Steps").unwrap_or_default();
    let field = |key: &str| {
        steps
            .lines()
            .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
    };
    let name = field("strategy:").ok_or_else(|| bad("prompt names no strategy".into()))?;
    let id = StrategyId::parse(&name).ok_or_else(|| bad(format!("unknown strategy {name}")))?;
    let handle = registry_lookup(id).map_err(|e| bad(e.to_string()))?;
    let mut hp: Hyperparams = handle.defaults;
    for line in prompt.section("Numerical Settings").unwrap_or_default().lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| bad(format!("setting `{}` is not numeric", line.trim())))?;
        match k.trim() {
            "max_iter" => hp.max_iter = value as u32,
            "tol" => hp.tol = value,
            "grid_points" => hp.grid_points = value as u32,
            "step_init" => hp.step_init = value,
            "penalty" => hp.penalty = value,
            "target_scale" => hp.target_scale = value,
            other => return Err(bad(format!("unknown setting `{other}`"))),
        }
    }
    let mut plan = SolverPlan {
        strategy: SolverStrategy {
            strategy_id: id,
            hyperparams: hp,
        },
        preprocessing: field("preprocess:").map(|v| parse_steps(&v)).unwrap_or_default(),
        postprocessing: field("postprocess:").map(|v| parse_steps(&v)).unwrap_or_default(),
        rendered_source: None,
        revision: 0,
    };
    plan.validate()?;
    plan.rendered_source = Some(render_source(&plan));
    Ok(plan)
}

/// Audit pseudocode of a plan. Write-only: nothing ever parses it.
pub fn render_source(plan: &SolverPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# plan revision {}", plan.revision);
    let settings: Vec<String> = plan
        .strategy
        .hyperparam_map()
        .into_iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    for s in &plan.preprocessing {
        let _ = writeln!(out, "apply {s}");
    }
    let _ = writeln!(out, "solution = {}({})", plan.strategy.strategy_id, settings.join(", "));
    for s in &plan.postprocessing {
        let _ = writeln!(out, "solution = {s}(solution)");
    }
    let _ = writeln!(out, "report feasibility_check(solution) and objective(solution)");
    out
}

/// Deterministic backend built from the tables above.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBackend;

impl StageBackend for RuleBackend {
    fn name(&self) -> &'static str {
        "rule"
    }

    fn formulate(
        &self,
        task: &TaskDescription,
        theta: &ScenarioDescriptor,
        _warnings: &mut Vec<String>,
    ) -> Result<ProblemSpec, PipelineError> {
        theta
            .validate()
            .map_err(|e| PipelineError::SchemaViolation(e.to_string()))?;
        Ok(formulate_rule(task, theta))
    }

    fn select_strategy(
        &self,
        spec: &ProblemSpec,
        _warnings: &mut Vec<String>,
    ) -> Result<SolverStrategy, PipelineError> {
        let first = ranked_strategies(spec)?[0];
        SolverStrategy::with_defaults(first).map_err(|e| PipelineError::NoApplicableStrategy(e.to_string()))
    }

    fn upsample(
        &self,
        theta: &ScenarioDescriptor,
        spec: &ProblemSpec,
        strategy: &SolverStrategy,
        _warnings: &mut Vec<String>,
    ) -> Result<ImplementationPrompt, PipelineError> {
        Ok(upsample_rule(theta, spec, strategy))
    }

    fn generate_plan(
        &self,
        prompt: &ImplementationPrompt,
        _warnings: &mut Vec<String>,
    ) -> Result<SolverPlan, PipelineError> {
        generate_plan_rule(prompt)
    }
}
