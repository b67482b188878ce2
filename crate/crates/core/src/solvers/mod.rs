//! Iterative precoding solvers, one per scenario family, plus exhaustive
//! oracles and a strategy registry.
//!
//! Solvers are pure functions of (instance, hyperparameters). A solver that
//! runs out of iterations returns [`SolverError::NotConverged`] carrying the
//! partial outcome so callers can still inspect it.

mod ci;
mod cognitive;
mod duality;
mod hybrid;
mod oracle;
mod registry;
mod secrecy;
mod wmmse;

pub use ci::{
    ce_phase_coordinate_descent, ci_objective, one_bit_greedy_cd, CiProblem, CompositeInit, ONE_BIT_ALPHABET,
};
pub use cognitive::{
    cr_robust_sumrate, cr_sumrate_proj_ascent, project_cognitive, sum_rate_gradient, CognitiveProblem,
};
pub use duality::{fd_power_min, sinr_power_min_duality};
pub use hybrid::{
    digital_ci_power_min, hybrid_robust_ci_altmin, phase_matched_analog, robust_ci_power_of, HybridProblem,
};
pub use oracle::{exhaustive_oracle, OracleKind, ORACLE_LIMIT};
pub use registry::{registry_lookup, solve, HyperparamRange, HyperparamSchema, SolveOptions, SolverHandle, REGISTERED};
pub use secrecy::{secrecy_nullspace_maxmin, SecrecyProblem};
pub use wmmse::wmmse_sumrate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, Solution};
use crate::precoders::PrecoderError;

/// Identifier of a registered solver algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyId {
    SinrDualityPowerMin,
    CePhaseCoordinateDescent,
    OneBitGreedyCD,
    SecrecyNullspaceMaxMin,
    FdPowerMin,
    CrSumRateProjAscent,
    CrRobustSumRate,
    WmmseSumRate,
    HybridRobustCiAltMin,
    /// Reserved for a semidefinite-relaxation solver; not registered.
    SemidefiniteRelaxation,
}

impl StrategyId {
    pub const ALL: [StrategyId; 10] = [
        StrategyId::SinrDualityPowerMin,
        StrategyId::CePhaseCoordinateDescent,
        StrategyId::OneBitGreedyCD,
        StrategyId::SecrecyNullspaceMaxMin,
        StrategyId::FdPowerMin,
        StrategyId::CrSumRateProjAscent,
        StrategyId::CrRobustSumRate,
        StrategyId::WmmseSumRate,
        StrategyId::HybridRobustCiAltMin,
        StrategyId::SemidefiniteRelaxation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::SinrDualityPowerMin => "SinrDualityPowerMin",
            StrategyId::CePhaseCoordinateDescent => "CePhaseCoordinateDescent",
            StrategyId::OneBitGreedyCD => "OneBitGreedyCD",
            StrategyId::SecrecyNullspaceMaxMin => "SecrecyNullspaceMaxMin",
            StrategyId::FdPowerMin => "FdPowerMin",
            StrategyId::CrSumRateProjAscent => "CrSumRateProjAscent",
            StrategyId::CrRobustSumRate => "CrRobustSumRate",
            StrategyId::WmmseSumRate => "WmmseSumRate",
            StrategyId::HybridRobustCiAltMin => "HybridRobustCiAltMin",
            StrategyId::SemidefiniteRelaxation => "SemidefiniteRelaxation",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tunable settings shared by all solvers; each solver reads the ones it
/// uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub max_iter: u32,
    pub tol: f64,
    pub grid_points: u32,
    pub step_init: f64,
    /// Penalty weight or soft-min temperature, depending on the solver.
    pub penalty: f64,
    /// Multiplier applied to SINR targets (margin for refinement).
    #[serde(default = "one")]
    pub target_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-9,
            grid_points: 32,
            step_init: 1.0,
            penalty: 10.0,
            target_scale: 1.0,
        }
    }
}

/// A selected algorithm with its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverStrategy {
    pub strategy_id: StrategyId,
    pub hyperparams: Hyperparams,
}

impl SolverStrategy {
    /// Strategy with registry defaults.
    pub fn with_defaults(id: StrategyId) -> Result<Self, SolverError> {
        let handle = registry_lookup(id)?;
        Ok(Self {
            strategy_id: id,
            hyperparams: handle.defaults,
        })
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        registry_lookup(self.strategy_id)?.schema.check(&self.hyperparams)
    }

    /// Hyperparameters as a name → value map.
    pub fn hyperparam_map(&self) -> BTreeMap<String, f64> {
        let h = &self.hyperparams;
        [
            ("max_iter", f64::from(h.max_iter)),
            ("tol", h.tol),
            ("grid_points", f64::from(h.grid_points)),
            ("step_init", h.step_init),
            ("penalty", h.penalty),
            ("target_scale", h.target_scale),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Result of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    pub solution: Solution,
    /// Objective in the scenario's metric units.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration.
    pub trace: Vec<f64>,
}

impl SolverOutcome {
    pub(crate) fn new(solution: Solution, objective: f64, trace: Vec<f64>, converged: bool) -> Self {
        Self {
            solution,
            objective,
            iterations: trace.len(),
            converged,
            trace,
        }
    }

    /// `Ok(self)` when converged, else `NotConverged` carrying `self`.
    pub(crate) fn finish(self) -> Result<Self, SolverError> {
        if self.converged {
            Ok(self)
        } else {
            Err(SolverError::NotConverged {
                outcome: Box::new(self),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("solver did not converge within {} iterations", outcome.iterations)]
    NotConverged { outcome: Box<SolverOutcome> },
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("eavesdropper null space removes every user channel")]
    DegenerateNullspace,
    #[error("oracle instance too large: {0} evaluations")]
    TooLarge(f64),
    #[error("unknown or unregistered strategy {0}")]
    UnknownStrategy(String),
    #[error("invalid hyperparameter {name}: {value}")]
    InvalidHyperparam { name: String, value: f64 },
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Precoder(#[from] PrecoderError),
}

impl From<ModelError> for SolverError {
    fn from(e: ModelError) -> Self {
        SolverError::Precoder(PrecoderError::from(e))
    }
}

/// Golden-section maximization of `f` on `[lo, hi]`; returns `(x, f(x))`.
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut guard = 0;
    while hi - lo > tol && guard < 200 {
        guard += 1;
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximizes a 2π-periodic function: uniform grid, then golden-section
/// refinement around the best grid point. Ties on the grid go to the
/// smallest phase.
pub(crate) fn phase_search(mut f: impl FnMut(f64) -> f64, grid_points: u32, tol: f64) -> (f64, f64) {
    let n = grid_points.max(4);
    let step = std::f64::consts::TAU / f64::from(n);
    let mut best = (0.0, f(0.0));
    for i in 1..n {
        let t = step * f64::from(i);
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let refined = golden_max(&mut f, best.0 - step, best.0 + step, tol);
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}
