//! Strategy registry: default hyperparameters, accepted ranges and dispatch
//! from a scenario descriptor to the matching solver.

use serde::{Deserialize, Serialize};

use super::{
    ce_phase_coordinate_descent, cr_robust_sumrate, cr_sumrate_proj_ascent, fd_power_min, hybrid_robust_ci_altmin,
    one_bit_greedy_cd, secrecy_nullspace_maxmin, sinr_power_min_duality, wmmse_sumrate, CiProblem, CognitiveProblem,
    CompositeInit, HybridProblem, Hyperparams, SecrecyProblem, SolverError, SolverOutcome, StrategyId,
};
use crate::model::{Architecture, ConstraintKind, ObjectiveKind};
use crate::precoders::PowerBudget;
use crate::scenarios::ScenarioDescriptor;

/// Closed interval of accepted values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparamRange {
    pub min: f64,
    pub max: f64,
}

impl HyperparamRange {
    const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn contains(self, v: f64) -> bool {
        v.is_finite() && v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSchema {
    pub max_iter: HyperparamRange,
    pub tol: HyperparamRange,
    pub grid_points: HyperparamRange,
    pub step_init: HyperparamRange,
    pub penalty: HyperparamRange,
    pub target_scale: HyperparamRange,
}

const SCHEMA: HyperparamSchema = HyperparamSchema {
    max_iter: HyperparamRange::new(1.0, 100_000.0),
    tol: HyperparamRange::new(1e-15, 1e-1),
    grid_points: HyperparamRange::new(4.0, 4096.0),
    step_init: HyperparamRange::new(1e-9, 1e6),
    penalty: HyperparamRange::new(1e-6, 1e9),
    target_scale: HyperparamRange::new(1.0, 10.0),
};

impl HyperparamSchema {
    pub fn check(&self, h: &Hyperparams) -> Result<(), SolverError> {
        let fields = [
            ("max_iter", f64::from(h.max_iter), self.max_iter),
            ("tol", h.tol, self.tol),
            ("grid_points", f64::from(h.grid_points), self.grid_points),
            ("step_init", h.step_init, self.step_init),
            ("penalty", h.penalty, self.penalty),
            ("target_scale", h.target_scale, self.target_scale),
        ];
        for (name, value, range) in fields {
            if !range.contains(value) {
                return Err(SolverError::InvalidHyperparam {
                    name: name.to_string(),
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Registry record of one strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverHandle {
    pub id: StrategyId,
    pub objective: ObjectiveKind,
    pub architecture: Architecture,
    pub defaults: Hyperparams,
    pub schema: HyperparamSchema,
    pub summary: &'static str,
}

const fn hp(max_iter: u32, tol: f64, grid_points: u32, step_init: f64, penalty: f64) -> Hyperparams {
    Hyperparams {
        max_iter,
        tol,
        grid_points,
        step_init,
        penalty,
        target_scale: 1.0,
    }
}

const fn handle(
    id: StrategyId,
    objective: ObjectiveKind,
    architecture: Architecture,
    defaults: Hyperparams,
    summary: &'static str,
) -> SolverHandle {
    SolverHandle {
        id,
        objective,
        architecture,
        defaults,
        schema: SCHEMA,
        summary,
    }
}

/// Every registered strategy. The semidefinite-relaxation id is reserved
/// and deliberately absent.
pub const REGISTERED: [SolverHandle; 9] = [
    handle(
        StrategyId::SinrDualityPowerMin,
        ObjectiveKind::PowerMin,
        Architecture::FullyDigital,
        hp(500, 1e-9, 32, 1.0, 10.0),
        "uplink-downlink duality fixed point for SINR-constrained power minimization",
    ),
    handle(
        StrategyId::CePhaseCoordinateDescent,
        ObjectiveKind::CiMarginMax,
        Architecture::ConstantEnvelope,
        hp(200, 1e-9, 32, 1.0, 10.0),
        "per-antenna phase coordinate ascent on the worst-user CI margin",
    ),
    handle(
        StrategyId::OneBitGreedyCD,
        ObjectiveKind::CiMarginMax,
        Architecture::OneBit,
        hp(100, 1e-9, 4, 1.0, 10.0),
        "greedy per-antenna search over the 1-bit alphabet",
    ),
    handle(
        StrategyId::SecrecyNullspaceMaxMin,
        ObjectiveKind::SecrecyMaxMin,
        Architecture::FullyDigital,
        hp(1000, 1e-7, 32, 1.0, 10.0),
        "successive convex approximation of the worst-user rate inside the eavesdropper null space",
    ),
    handle(
        StrategyId::FdPowerMin,
        ObjectiveKind::PowerMin,
        Architecture::FullyDigital,
        hp(500, 1e-9, 32, 1.0, 10.0),
        "duality power minimization with a bisected self-interference multiplier",
    ),
    handle(
        StrategyId::CrSumRateProjAscent,
        ObjectiveKind::SumRateMax,
        Architecture::FullyDigital,
        hp(500, 1e-7, 32, 0.1, 10.0),
        "projected gradient ascent on the sum rate under an interference cap",
    ),
    handle(
        StrategyId::CrRobustSumRate,
        ObjectiveKind::SumRateMax,
        Architecture::FullyDigital,
        hp(500, 1e-7, 32, 0.1, 10.0),
        "projected gradient ascent under a worst-case interference cap",
    ),
    handle(
        StrategyId::WmmseSumRate,
        ObjectiveKind::SumRateMax,
        Architecture::FullyDigital,
        hp(500, 1e-7, 32, 1.0, 10.0),
        "weighted-MMSE block coordinate descent",
    ),
    handle(
        StrategyId::HybridRobustCiAltMin,
        ObjectiveKind::PowerMin,
        Architecture::Hybrid,
        hp(100, 1e-6, 32, 1.0, 10.0),
        "alternating analog phase sweep and exact digital CI power minimization",
    ),
];

pub fn registry_lookup(id: StrategyId) -> Result<&'static SolverHandle, SolverError> {
    REGISTERED
        .iter()
        .find(|h| h.id == id)
        .ok_or_else(|| SolverError::UnknownStrategy(id.name().to_string()))
}

/// Per-run options beyond the hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub init: CompositeInit,
    /// Seeds any randomized restarts.
    #[serde(default)]
    pub seed: u64,
}

impl SolveOptions {
    pub fn new(hyperparams: Hyperparams) -> Self {
        Self {
            hyperparams,
            init: CompositeInit::default(),
            seed: 0,
        }
    }
}

fn missing(what: &str) -> SolverError {
    SolverError::InvalidInput(format!("scenario lacks {what}"))
}

fn budget_of(theta: &ScenarioDescriptor) -> Result<PowerBudget, SolverError> {
    Ok(PowerBudget::new(theta.p_max())?)
}

/// Runs strategy `id` on `theta`, extracting the solver's inputs from the
/// descriptor. Fails with `InvalidInput` if the strategy does not fit the
/// scenario's architecture or the descriptor lacks a required field.
pub fn solve(id: StrategyId, theta: &ScenarioDescriptor, options: &SolveOptions) -> Result<SolverOutcome, SolverError> {
    let handle = registry_lookup(id)?;
    handle.schema.check(&options.hyperparams)?;
    if handle.architecture != theta.sys.architecture {
        return Err(SolverError::InvalidInput(format!(
            "{id} targets {:?} transmitters but the scenario is {:?}",
            handle.architecture, theta.sys.architecture
        )));
    }
    let opts = &options.hyperparams;
    let h = &theta.ch.h;
    let sigma2 = theta.ch.sigma2;
    match id {
        StrategyId::SinrDualityPowerMin => {
            let gammas = theta
                .sinr_targets()
                .ok_or_else(|| missing("per-user SINR or rate targets"))?;
            sinr_power_min_duality(h, &gammas, sigma2, opts)
        }
        StrategyId::FdPowerMin => {
            let gammas = theta
                .sinr_targets()
                .ok_or_else(|| missing("per-user SINR or rate targets"))?;
            let g_si = theta
                .ch
                .g_si
                .as_ref()
                .ok_or_else(|| missing("a self-interference channel"))?;
            let eta = theta
                .constraint(ConstraintKind::SelfInterference)
                .ok_or_else(|| missing("a self-interference constraint"))?
                .param("eta");
            fd_power_min(h, &gammas, g_si, eta, sigma2, opts)
        }
        StrategyId::CePhaseCoordinateDescent | StrategyId::OneBitGreedyCD => {
            let symbols = theta.ch.symbols.as_deref().ok_or_else(|| missing("symbols"))?;
            let problem = CiProblem {
                h,
                symbols,
                m: theta.symbol_order(),
                sigma: theta.sigma(),
                budget: budget_of(theta)?,
            };
            if id == StrategyId::OneBitGreedyCD {
                one_bit_greedy_cd(&problem, options.init, opts)
            } else {
                ce_phase_coordinate_descent(&problem, options.init, opts)
            }
        }
        StrategyId::SecrecyNullspaceMaxMin => {
            let problem = SecrecyProblem {
                h,
                h_eve: theta.ch.h_eve.as_ref(),
                sigma2,
                budget: budget_of(theta)?,
                seed: options.seed,
            };
            secrecy_nullspace_maxmin(&problem, opts)
        }
        StrategyId::CrSumRateProjAscent | StrategyId::CrRobustSumRate => {
            let cap = theta
                .constraint(ConstraintKind::InterferenceTemperature)
                .or_else(|| theta.constraint(ConstraintKind::RobustInterferenceTemperature));
            let problem = CognitiveProblem {
                h,
                g: theta.ch.g.as_ref().filter(|_| cap.is_some()),
                i_th: cap.map_or(f64::INFINITY, |c| c.param("i_th")),
                sigma2,
                budget: budget_of(theta)?,
            };
            if id == StrategyId::CrRobustSumRate {
                let epsilon = theta
                    .constraint(ConstraintKind::RobustInterferenceTemperature)
                    .map(|c| c.param("epsilon"))
                    .or(theta.ch.epsilon)
                    .unwrap_or(0.0);
                cr_robust_sumrate(&problem, epsilon, opts)
            } else {
                cr_sumrate_proj_ascent(&problem, opts)
            }
        }
        StrategyId::WmmseSumRate => wmmse_sumrate(h, sigma2, budget_of(theta)?, opts),
        StrategyId::HybridRobustCiAltMin => {
            let symbols = theta.ch.symbols.as_deref().ok_or_else(|| missing("symbols"))?;
            let c = theta
                .constraint(ConstraintKind::RobustCiMargin)
                .ok_or_else(|| missing("a robust CI margin constraint"))?;
            let problem = HybridProblem {
                h,
                symbols,
                m: c.param("m") as u32,
                epsilon: c.param("epsilon"),
                delta: c.param("delta"),
                sigma: theta.sigma(),
                n_rf: theta.sys.n_rf.ok_or_else(|| missing("N_rf"))?,
                seed: options.seed,
            };
            hybrid_robust_ci_altmin(&problem, opts)
        }
        StrategyId::SemidefiniteRelaxation => Err(SolverError::UnknownStrategy(id.name().to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_metrics, feasibility_check, DEFAULT_FEASIBILITY_TOL};
    use crate::scenarios::instantiate_scenario;

    #[test]
    fn reserved_id_is_unregistered() {
        assert!(matches!(
            registry_lookup(StrategyId::SemidefiniteRelaxation),
            Err(SolverError::UnknownStrategy(_))
        ));
        for h in REGISTERED {
            assert_eq!(registry_lookup(h.id).unwrap().id, h.id);
            h.schema.check(&h.defaults).unwrap();
        }
    }

    #[test]
    fn schema_rejects_out_of_range() {
        let bad = Hyperparams {
            tol: 0.0,
            ..Hyperparams::default()
        };
        assert!(matches!(SCHEMA.check(&bad), Err(SolverError::InvalidHyperparam { .. })));
        let bad = Hyperparams {
            max_iter: 0,
            ..Hyperparams::default()
        };
        assert!(SCHEMA.check(&bad).is_err());
    }

    #[test]
    fn architecture_mismatch_rejected() {
        let (_, d) = instantiate_scenario(2, 10.0, 1).unwrap();
        let o = SolveOptions::new(Hyperparams::default());
        assert!(matches!(
            solve(StrategyId::WmmseSumRate, &d, &o),
            Err(SolverError::InvalidInput(_))
        ));
    }

    #[test]
    fn every_family_solves_feasibly_at_ten_db() {
        let pairs = [
            (1, StrategyId::SinrDualityPowerMin),
            (2, StrategyId::CePhaseCoordinateDescent),
            (3, StrategyId::OneBitGreedyCD),
            (4, StrategyId::SecrecyNullspaceMaxMin),
            (5, StrategyId::FdPowerMin),
            (6, StrategyId::CrSumRateProjAscent),
            (7, StrategyId::CrRobustSumRate),
            (8, StrategyId::WmmseSumRate),
            (9, StrategyId::HybridRobustCiAltMin),
        ];
        for (scenario, id) in pairs {
            let (_, d) = instantiate_scenario(scenario, 10.0, 3).unwrap();
            let handle = registry_lookup(id).unwrap();
            let out = solve(id, &d, &SolveOptions::new(handle.defaults))
                .unwrap_or_else(|e| panic!("scenario {scenario}: {e}"));
            let v = feasibility_check(&out.solution, &d, DEFAULT_FEASIBILITY_TOL).unwrap();
            assert!(v.is_empty(), "scenario {scenario}: {v:?}");
            compute_metrics(&out.solution, &d).unwrap();
            assert_eq!(out.iterations, out.trace.len());
        }
    }
}
