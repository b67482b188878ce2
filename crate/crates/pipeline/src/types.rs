//! Stage artifacts: problem specification, implementation prompt, solver
//! plan, execution feedback and the final pipeline result.

use std::fmt;

use serde::{Deserialize, Serialize};

use precoding_core::metrics::Violation;
use precoding_core::model::{Architecture, Constraint, ObjectiveKind, Solution};
use precoding_core::scenarios::ScenarioDescriptor;
use precoding_core::solvers::{CompositeInit, SolverStrategy};

use crate::error::PipelineError;

/// Value domain of a design variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    /// Unconstrained complex entries.
    Complex,
    /// Real phases rendered at constant amplitude.
    Phase,
    /// Entries of the 1-bit alphabet `a·{±1 ± j}`.
    OneBitAlphabet,
    /// Complex entries of unit modulus.
    UnitModulus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variable {
    pub name: String,
    pub shape: Vec<usize>,
    pub domain: DomainTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub direction: Direction,
    /// Label of the metric the objective is scored with.
    pub expression_id: String,
}

/// How a constraint ties the design variables together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Involves one user's quantities, with interference from the others.
    PerUser,
    /// Couples all beamformers through a shared sum.
    Joint,
    /// Acts on each antenna entry separately.
    PerAntenna,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedConstraint {
    /// Position in the source descriptor's constraint list.
    pub index: usize,
    pub constraint: Constraint,
    pub convex: bool,
    pub coupling: Coupling,
}

/// Structured problem specification produced by the formulation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub variables: Vec<Variable>,
    pub objective: ObjectiveSpec,
    pub constraints: Vec<AnnotatedConstraint>,
    pub notes: String,
}

impl ProblemSpec {
    /// Transmitter architecture implied by the variable domains.
    pub fn architecture(&self) -> Option<Architecture> {
        let has = |d: DomainTag| self.variables.iter().any(|v| v.domain == d);
        if has(DomainTag::UnitModulus) && self.variables.len() >= 2 {
            Some(Architecture::Hybrid)
        } else if has(DomainTag::OneBitAlphabet) {
            Some(Architecture::OneBit)
        } else if has(DomainTag::Phase) {
            Some(Architecture::ConstantEnvelope)
        } else if has(DomainTag::Complex) {
            Some(Architecture::FullyDigital)
        } else {
            None
        }
    }

    /// True when any constraint guards against channel uncertainty.
    pub fn is_robust(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| c.constraint.get("epsilon").is_some_and(|e| e > 0.0))
    }

    pub fn has(&self, kind: precoding_core::model::ConstraintKind) -> bool {
        self.constraints.iter().any(|c| c.constraint.kind == kind)
    }

    /// Checks the spec against its source descriptor: the objective matches,
    /// every descriptor constraint appears exactly once at its own index, and
    /// the variables describe the descriptor's architecture.
    pub fn validate_against(&self, theta: &ScenarioDescriptor) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::SchemaViolation(m));
        if self.objective.kind != theta.obj {
            return bad(format!(
                "objective {:?} but scenario asks for {:?}",
                self.objective.kind, theta.obj
            ));
        }
        let expected_dir = if theta.obj.is_minimization() {
            Direction::Min
        } else {
            Direction::Max
        };
        if self.objective.direction != expected_dir {
            return bad("objective direction does not match the objective kind".into());
        }
        if self.constraints.len() != theta.con.len() {
            return bad(format!(
                "{} constraints listed, scenario has {}",
                self.constraints.len(),
                theta.con.len()
            ));
        }
        let mut seen = vec![false; theta.con.len()];
        for c in &self.constraints {
            match theta.con.get(c.index) {
                Some(src) if *src == c.constraint && !seen[c.index] => seen[c.index] = true,
                _ => return bad(format!("constraint entry {} does not match the scenario", c.index)),
            }
        }
        if self.architecture() != Some(theta.sys.architecture) {
            return bad(format!(
                "variables describe {:?}, scenario is {:?}",
                self.architecture(),
                theta.sys.architecture
            ));
        }
        Ok(())
    }
}

/// Section headings of an implementation prompt, in order.
pub const PROMPT_SECTIONS: [&str; 7] = [
    "Variables",
    "Objective",
    "Constraints",
    "Algorithmic Steps",
    "Numerical Settings",
    "Input-Output Format",
    "Feasibility Checks",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplementationPrompt {
    pub sections: Vec<PromptSection>,
}

impl ImplementationPrompt {
    pub fn section(&self, heading: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.heading == heading)
            .map(|s| s.body.as_str())
    }

    /// Exactly the seven headings, in order, none empty.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let headings: Vec<&str> = self.sections.iter().map(|s| s.heading.as_str()).collect();
        if headings != PROMPT_SECTIONS {
            return Err(PipelineError::SchemaViolation(format!(
                "prompt headings {headings:?} differ from {PROMPT_SECTIONS:?}"
            )));
        }
        if let Some(s) = self.sections.iter().find(|s| s.body.trim().is_empty()) {
            return Err(PipelineError::SchemaViolation(format!(
                "prompt section {} is empty",
                s.heading
            )));
        }
        Ok(())
    }
}

/// A pre- or post-processing step a plan may request. Plans carry these as
/// strings; only the vocabulary below is accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanStep {
    /// Start symbol-level searches from the MRT composite.
    MrtCompositeInit,
    /// Start symbol-level searches from the ZF composite.
    ZfCompositeInit,
    /// Scale the solution down to the power budget if it exceeds it.
    PowerRescale,
    /// Scale the solution to `ratio` times the power budget.
    Inflate(f64),
}

impl PlanStep {
    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        match s {
            "mrt-composite-init" => Ok(PlanStep::MrtCompositeInit),
            "zf-composite-init" => Ok(PlanStep::ZfCompositeInit),
            "power-rescale" => Ok(PlanStep::PowerRescale),
            _ => match s.strip_prefix("inflate:").map(str::parse::<f64>) {
                Some(Ok(r)) if r.is_finite() && r > 0.0 => Ok(PlanStep::Inflate(r)),
                _ => Err(PipelineError::SchemaViolation(format!("unknown plan step `{s}`"))),
            },
        }
    }

    fn is_pre(self) -> bool {
        matches!(self, PlanStep::MrtCompositeInit | PlanStep::ZfCompositeInit)
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanStep::MrtCompositeInit => f.write_str("mrt-composite-init"),
            PlanStep::ZfCompositeInit => f.write_str("zf-composite-init"),
            PlanStep::PowerRescale => f.write_str("power-rescale"),
            PlanStep::Inflate(r) => write!(f, "inflate:{r}"),
        }
    }
}

/// Validated, executable description of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverPlan {
    pub strategy: SolverStrategy,
    pub preprocessing: Vec<String>,
    pub postprocessing: Vec<String>,
    /// Human-readable pseudocode for audit. Never interpreted.
    #[serde(default)]
    pub rendered_source: Option<String>,
    pub revision: u32,
}

impl SolverPlan {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.strategy
            .validate()
            .map_err(|e| PipelineError::SchemaViolation(e.to_string()))?;
        for s in &self.preprocessing {
            if !PlanStep::parse(s)?.is_pre() {
                return Err(PipelineError::SchemaViolation(format!(
                    "`{s}` is not a preprocessing step"
                )));
            }
        }
        for s in &self.postprocessing {
            if PlanStep::parse(s)?.is_pre() {
                return Err(PipelineError::SchemaViolation(format!(
                    "`{s}` is not a postprocessing step"
                )));
            }
        }
        Ok(())
    }

    /// Initialization requested by the preprocessing steps.
    pub fn composite_init(&self) -> CompositeInit {
        let mrt = self.preprocessing.iter().any(|s| s == "mrt-composite-init");
        let zf = self.preprocessing.iter().any(|s| s == "zf-composite-init");
        match (mrt, zf) {
            (true, false) => CompositeInit::Mrt,
            (false, true) => CompositeInit::Zf,
            _ => CompositeInit::Both,
        }
    }

    pub fn post_steps(&self) -> Result<Vec<PlanStep>, PipelineError> {
        self.postprocessing.iter().map(|s| PlanStep::parse(s)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackStatus {
    Ok,
    /// The plan failed validation before running.
    ValidationError,
    /// The solver failed, panicked or exceeded the wall-time cap.
    RuntimeError,
    /// The solver stopped at its iteration limit.
    NotConverged,
    /// The run finished but the solution violates constraints, or the
    /// solver proved the instance infeasible.
    Infeasible,
}

/// Outcome of executing one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub status: FeedbackStatus,
    pub violations: Vec<Violation>,
    pub objective: Option<f64>,
    pub iterations: Option<usize>,
    pub warnings: Vec<String>,
    /// Seconds spent executing. Not serialized, so transcripts stay
    /// reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl Feedback {
    pub(crate) fn new(status: FeedbackStatus) -> Self {
        Self {
            status,
            violations: Vec::new(),
            objective: None,
            iterations: None,
            warnings: Vec::new(),
            wall_time: 0.0,
        }
    }

    /// Equality of everything but the wall time.
    pub fn same_outcome(&self, other: &Feedback) -> bool {
        Feedback {
            wall_time: 0.0,
            ..self.clone()
        } == Feedback {
            wall_time: 0.0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminatedBy {
    Accepted,
    MaxRefinements,
    Unrecoverable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    /// `None` only when formulation itself failed.
    pub spec: Option<ProblemSpec>,
    pub strategy_history: Vec<SolverStrategy>,
    pub plans: Vec<SolverPlan>,
    pub feedbacks: Vec<Feedback>,
    pub final_solution: Option<Solution>,
    pub final_objective: Option<f64>,
    pub terminated_by: TerminatedBy,
    /// Stage-level notes such as backend fallbacks.
    pub warnings: Vec<String>,
}

impl PipelineResult {
    /// Checks the structural invariants of a run record.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.plans.len() != self.feedbacks.len() {
            return Err(format!(
                "{} plans but {} feedbacks",
                self.plans.len(),
                self.feedbacks.len()
            ));
        }
        for (i, p) in self.plans.iter().enumerate() {
            if p.revision as usize != i {
                return Err(format!("plan {i} has revision {}", p.revision));
            }
        }
        if self.terminated_by == TerminatedBy::Accepted {
            match self.feedbacks.last() {
                Some(f) if f.status == FeedbackStatus::Ok && f.violations.is_empty() => {}
                _ => return Err("accepted run whose last feedback is not Ok".into()),
            }
        }
        for f in &self.feedbacks {
            if f.violations.iter().any(|v| !(v.magnitude >= 0.0)) {
                return Err("negative violation magnitude".into());
            }
            if f.status == FeedbackStatus::Ok && !f.violations.is_empty() {
                return Err("Ok feedback with violations".into());
            }
        }
        Ok(())
    }
}
