//! Comparison methods for each scenario family: the closed-form and
//! lightly-iterative baselines reported next to the tuned solvers.
//!
//! A baseline always returns a solution of the scenario's architecture. When
//! a baseline cannot meet the constraints (e.g. rate targets unreachable
//! along its fixed directions) it still returns its best effort at the power
//! cap, and the feasibility check reports it.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::symbol_composite;
use crate::model::{
    norm_sqr, normalized, pseudo_inverse, scale_vec, ComplexMatrix, ConstraintKind, ModelError, Solution,
    DEFAULT_RANK_TOL,
};
use crate::precoders::{
    align_baseband, ce_project, mrt, mrt_composite, mrt_directions, one_bit_quantize, power_min_scaling,
    random_precoder, rzf, rzf_directions, slnr, zf, zf_composite, zf_directions, PowerBudget, PrecoderDims,
    PrecoderError,
};
use crate::rng::{mix_seed, seeded, uniform_phase};
use crate::scenarios::{Family, ScenarioDescriptor};
use crate::solvers::{
    hybrid_robust_ci_altmin, project_cognitive, registry_lookup, robust_ci_power_of, secrecy_nullspace_maxmin, solve,
    CognitiveProblem, CompositeInit, HybridProblem, Hyperparams, SecrecyProblem, SolveOptions, SolverError, StrategyId,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("baseline {kind} does not apply to {family:?} scenarios")]
    NotApplicable { kind: BaselineKind, family: Family },
    #[error("scenario lacks {0}")]
    MissingInput(&'static str),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<PrecoderError> for BaselineError {
    fn from(e: PrecoderError) -> Self {
        BaselineError::Solver(SolverError::Precoder(e))
    }
}

impl From<ModelError> for BaselineError {
    fn from(e: ModelError) -> Self {
        BaselineError::Solver(SolverError::from(e))
    }
}

/// A comparison method. What it computes depends on the family: `Zf` is a
/// rate-scaled ZF beamformer for power minimization, a CE projection of the
/// ZF composite for constant-envelope scenarios, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Random,
    Mrt,
    Zf,
    Rzf,
    Slnr,
    EqualPower,
    InterferenceAware,
    InterferenceNulling,
    SocpSurrogate,
    ExhaustiveMrt,
    CoordinateDescent,
    GreedyOneBit,
    SecrecyUnaware,
    NullspaceZf,
    SinrOnly,
    PhaseMatchedHybrid,
    RzfHybrid,
    LimitedAlternating,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 18] = [
        BaselineKind::Random,
        BaselineKind::Mrt,
        BaselineKind::Zf,
        BaselineKind::Rzf,
        BaselineKind::Slnr,
        BaselineKind::EqualPower,
        BaselineKind::InterferenceAware,
        BaselineKind::InterferenceNulling,
        BaselineKind::SocpSurrogate,
        BaselineKind::ExhaustiveMrt,
        BaselineKind::CoordinateDescent,
        BaselineKind::GreedyOneBit,
        BaselineKind::SecrecyUnaware,
        BaselineKind::NullspaceZf,
        BaselineKind::SinrOnly,
        BaselineKind::PhaseMatchedHybrid,
        BaselineKind::RzfHybrid,
        BaselineKind::LimitedAlternating,
    ];

    /// Stable machine name (kebab case).
    pub fn id(self) -> &'static str {
        use BaselineKind::*;
        match self {
            Random => "random",
            Mrt => "mrt",
            Zf => "zf",
            Rzf => "rzf",
            Slnr => "slnr",
            EqualPower => "equal-power",
            InterferenceAware => "interference-aware",
            InterferenceNulling => "interference-nulling",
            SocpSurrogate => "socp-surrogate",
            ExhaustiveMrt => "exhaustive-mrt",
            CoordinateDescent => "coordinate-descent",
            GreedyOneBit => "greedy-one-bit",
            SecrecyUnaware => "secrecy-unaware",
            NullspaceZf => "nullspace-zf",
            SinrOnly => "sinr-only",
            PhaseMatchedHybrid => "phase-matched-hybrid",
            RzfHybrid => "rzf-hybrid",
            LimitedAlternating => "limited-alternating",
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    /// Display name used in report tables for this family.
    pub fn label(self, family: Family) -> &'static str {
        use BaselineKind::*;
        use Family::*;
        match (self, family) {
            (Random, ConstantEnvelopeCi) => "Random CE",
            (Random, OneBitCi) => "Random 1-bit",
            (Random, HybridRobustCi) => "Random Hybrid",
            (Random, _) => "Random",
            (Mrt, ConstantEnvelopeCi) => "MRT + CE projection",
            (Mrt, OneBitCi) => "MRT 1-bit",
            (Mrt, SecrecyMulticast) => "MRT Beamforming",
            (Mrt, _) => "MRT",
            (Zf, ConstantEnvelopeCi) => "ZF + CE projection",
            (Zf, OneBitCi) => "ZF 1-bit",
            (Zf, _) => "ZF",
            (Rzf, MuMimoPowerMin) => "Regularized MMSE",
            (Rzf, _) => "RZF",
            (Slnr, _) => "Plain SLNR",
            (EqualPower, _) => "Equal power",
            (InterferenceAware, _) => "Interference-aware",
            (InterferenceNulling, _) => "Interference Nulling",
            (SocpSurrogate, _) => "SOCP surrogate",
            (ExhaustiveMrt, _) => "Exhaustive MRT",
            (CoordinateDescent, _) => "Coordinate descent CE",
            (GreedyOneBit, _) => "CD Greedy 1-bit",
            (SecrecyUnaware, _) => "Secrecy-unaware",
            (NullspaceZf, _) => "ZF-like Null-space",
            (SinrOnly, _) => "SINR-only",
            (PhaseMatchedHybrid, _) => "Phase-Matched Hybrid",
            (RzfHybrid, _) => "Regularized ZF Hybrid",
            (LimitedAlternating, _) => "Limited Alternating",
        }
    }

    /// True for baselines whose output depends on a random draw.
    pub fn is_randomized(self) -> bool {
        self == BaselineKind::Random
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Baselines compared against in each family, in report order.
pub fn baselines_for(family: Family) -> &'static [BaselineKind] {
    use BaselineKind::*;
    match family {
        Family::MuMimoPowerMin => &[Zf, Rzf, SocpSurrogate, ExhaustiveMrt],
        Family::ConstantEnvelopeCi => &[Random, Mrt, Zf, CoordinateDescent],
        Family::OneBitCi => &[Random, Zf, GreedyOneBit, Mrt],
        Family::SecrecyMulticast => &[Mrt, SecrecyUnaware, NullspaceZf],
        Family::FullDuplexPowerMin => &[Mrt, Zf, SinrOnly],
        Family::CognitiveSumRate => &[Random, EqualPower, Mrt, Zf, InterferenceAware],
        Family::CognitiveRobustSumRate => &[Random, Mrt, Zf, InterferenceNulling],
        Family::FullDuplexSumRate => &[Random, Mrt, Zf, Rzf, Slnr],
        Family::HybridRobustCi => &[Random, PhaseMatchedHybrid, RzfHybrid, LimitedAlternating],
    }
}

/// Family of a descriptor, recovered from its objective, architecture and
/// constraint set.
pub fn family_of(theta: &ScenarioDescriptor) -> Family {
    use crate::model::{Architecture as A, ObjectiveKind as O};
    match (theta.obj, theta.sys.architecture) {
        (_, A::ConstantEnvelope) => Family::ConstantEnvelopeCi,
        (_, A::OneBit) => Family::OneBitCi,
        (_, A::Hybrid) => Family::HybridRobustCi,
        (O::SecrecyMaxMin, _) => Family::SecrecyMulticast,
        (O::PowerMin, _) if theta.has(ConstraintKind::SelfInterference) => Family::FullDuplexPowerMin,
        (O::PowerMin, _) => Family::MuMimoPowerMin,
        (_, _) if theta.has(ConstraintKind::RobustInterferenceTemperature) => Family::CognitiveRobustSumRate,
        (_, _) if theta.has(ConstraintKind::InterferenceTemperature) => Family::CognitiveSumRate,
        _ => Family::FullDuplexSumRate,
    }
}

const RANDOM_STREAM: u64 = 0x7261_6e64;

fn beams(s: Solution) -> ComplexMatrix {
    match s {
        Solution::BeamformerMatrix(w) => w,
        _ => unreachable!("fully digital precoder"),
    }
}

fn defaults(id: StrategyId) -> Hyperparams {
    registry_lookup(id).map(|h| h.defaults).unwrap_or_default()
}

/// Result of a solver used as a baseline; a partial result counts.
fn solver_solution(result: Result<crate::solvers::SolverOutcome, SolverError>) -> Result<Solution, BaselineError> {
    match result {
        Ok(out) => Ok(out.solution),
        Err(SolverError::NotConverged { outcome }) => Ok(outcome.solution),
        Err(e) => Err(e.into()),
    }
}

/// Runs baseline `kind` on `theta`. `seed` drives randomized baselines only.
pub fn run_baseline(kind: BaselineKind, theta: &ScenarioDescriptor, seed: u64) -> Result<Solution, BaselineError> {
    let family = family_of(theta);
    if !baselines_for(family).contains(&kind) {
        return Err(BaselineError::NotApplicable { kind, family });
    }
    let h = &theta.ch.h;
    let sigma2 = theta.ch.sigma2;
    let budget = PowerBudget::new(theta.p_max())?;
    let random_seed = mix_seed(seed, RANDOM_STREAM);
    use BaselineKind::*;
    use Family::*;
    match family {
        MuMimoPowerMin | FullDuplexPowerMin => {
            let gammas = theta
                .sinr_targets()
                .ok_or(BaselineError::MissingInput("SINR targets"))?;
            let dirs = match kind {
                Zf => zf_directions(h)?,
                Rzf => rzf_directions(h, budget, sigma2)?,
                Mrt | ExhaustiveMrt => mrt_directions(h)?,
                SocpSurrogate | SinrOnly => {
                    let id = StrategyId::SinrDualityPowerMin;
                    return solver_solution(solve(id, theta, &SolveOptions::new(defaults(id))));
                }
                _ => unreachable!("filtered by baselines_for"),
            };
            Ok(Solution::BeamformerMatrix(
                power_min_scaling(h, &dirs, &gammas, sigma2, budget.p_max()).0,
            ))
        }
        ConstantEnvelopeCi | OneBitCi => {
            let symbols = theta
                .ch
                .symbols
                .as_deref()
                .ok_or(BaselineError::MissingInput("symbols"))?;
            let project = |x: &[Complex64]| {
                if family == ConstantEnvelopeCi {
                    ce_project(x, budget)
                } else {
                    one_bit_quantize(x, budget)
                }
            };
            match kind {
                Random => Ok(random_precoder(PrecoderDims::of(theta), budget, random_seed)),
                Mrt => Ok(project(&mrt_composite(h, symbols))),
                Zf => Ok(project(&zf_composite(h, symbols)?)),
                CoordinateDescent | GreedyOneBit => {
                    let id = if family == ConstantEnvelopeCi {
                        StrategyId::CePhaseCoordinateDescent
                    } else {
                        StrategyId::OneBitGreedyCD
                    };
                    let options = SolveOptions {
                        init: CompositeInit::Mrt,
                        ..SolveOptions::new(defaults(id))
                    };
                    solver_solution(solve(id, theta, &options))
                }
                _ => unreachable!("filtered by baselines_for"),
            }
        }
        SecrecyMulticast => {
            let full = |v: Vec<Complex64>| -> Result<Solution, BaselineError> {
                let u = normalized(&v).ok_or(BaselineError::MissingInput("a nonzero channel"))?;
                Ok(Solution::BeamformerMatrix(ComplexMatrix::column_vector(&scale_vec(
                    &u,
                    budget.p_max().sqrt(),
                ))))
            };
            let sum: Vec<Complex64> = (0..h.cols())
                .map(|n| {
                    (0..h.rows())
                        .map(|k| h[(k, n)].conj() / h.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
                        .sum()
                })
                .collect();
            match kind {
                Mrt => full(sum),
                NullspaceZf => {
                    let eve = theta
                        .ch
                        .h_eve
                        .as_ref()
                        .ok_or(BaselineError::MissingInput("an eavesdropper channel"))?;
                    let e: Vec<Complex64> = eve.row(0).iter().map(|z| z.conj()).collect();
                    let e = normalized(&e).ok_or(BaselineError::MissingInput("a nonzero eavesdropper channel"))?;
                    let c: Complex64 = e.iter().zip(&sum).map(|(a, b)| a.conj() * b).sum();
                    full(sum.iter().zip(&e).map(|(v, ei)| v - ei * c).collect())
                }
                SecrecyUnaware => {
                    let problem = SecrecyProblem {
                        h,
                        h_eve: None,
                        sigma2,
                        budget,
                        seed,
                    };
                    solver_solution(secrecy_nullspace_maxmin(
                        &problem,
                        &defaults(StrategyId::SecrecyNullspaceMaxMin),
                    ))
                }
                _ => unreachable!("filtered by baselines_for"),
            }
        }
        CognitiveSumRate | CognitiveRobustSumRate | FullDuplexSumRate => {
            let dims = PrecoderDims::of(theta);
            match kind {
                Random => Ok(random_precoder(dims, budget, random_seed)),
                Mrt => mrt(h, budget).map_err(Into::into),
                Zf => zf(h, budget).map_err(Into::into),
                Rzf => rzf(h, budget, sigma2).map_err(Into::into),
                Slnr => slnr(h, budget, sigma2).map_err(Into::into),
                EqualPower => {
                    let each = (budget.p_max() / dims.k as f64).sqrt();
                    let w = ComplexMatrix::from_fn(dims.n_t, dims.k, |n, k| {
                        if n == k % dims.n_t {
                            Complex64::new(each, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    });
                    Ok(Solution::BeamformerMatrix(w))
                }
                InterferenceAware | InterferenceNulling => {
                    let cap = theta
                        .constraint(ConstraintKind::InterferenceTemperature)
                        .or_else(|| theta.constraint(ConstraintKind::RobustInterferenceTemperature))
                        .ok_or(BaselineError::MissingInput("an interference constraint"))?;
                    let g = theta
                        .ch
                        .g
                        .as_ref()
                        .ok_or(BaselineError::MissingInput("a primary-user channel"))?;
                    let epsilon = cap.get("epsilon").unwrap_or(0.0);
                    let problem = CognitiveProblem {
                        h,
                        g: Some(g),
                        i_th: cap.param("i_th"),
                        sigma2,
                        budget,
                    };
                    let mut w = beams(zf(h, budget)?);
                    if kind == InterferenceNulling {
                        w = null_towards(&w, g.row(0));
                        let p = w.frobenius_norm_sqr();
                        if p > 0.0 {
                            w = w.scale((budget.p_max() / p).sqrt());
                        }
                    }
                    Ok(Solution::BeamformerMatrix(project_cognitive(&w, &problem, epsilon)))
                }
                _ => unreachable!("filtered by baselines_for"),
            }
        }
        HybridRobustCi => hybrid_baseline(kind, theta, random_seed),
    }
}

/// Removes from every column its component along `gᴴ`.
fn null_towards(w: &ComplexMatrix, g: &[Complex64]) -> ComplexMatrix {
    let g_dir: Vec<Complex64> = g.iter().map(|z| z.conj()).collect();
    let Some(e) = normalized(&g_dir) else { return w.clone() };
    let cols: Vec<Vec<Complex64>> = w
        .columns()
        .into_iter()
        .map(|c| {
            let a: Complex64 = e.iter().zip(&c).map(|(x, y)| x.conj() * y).sum();
            c.iter().zip(&e).map(|(v, ei)| v - ei * a).collect()
        })
        .collect();
    ComplexMatrix::from_columns(&cols)
}

fn hybrid_baseline(
    kind: BaselineKind,
    theta: &ScenarioDescriptor,
    random_seed: u64,
) -> Result<Solution, BaselineError> {
    let h = &theta.ch.h;
    let symbols = theta
        .ch
        .symbols
        .as_deref()
        .ok_or(BaselineError::MissingInput("symbols"))?;
    let c = theta
        .constraint(ConstraintKind::RobustCiMargin)
        .ok_or(BaselineError::MissingInput("a robust CI margin constraint"))?;
    let (m, epsilon, delta) = (c.param("m") as u32, c.param("epsilon"), c.param("delta"));
    let n_rf = theta.sys.n_rf.ok_or(BaselineError::MissingInput("N_rf"))?;
    let (k, n) = h.shape();
    let sigma = theta.sigma();
    let reference = PowerBudget::new(theta.p_max())?;

    if kind == BaselineKind::LimitedAlternating {
        let problem = HybridProblem {
            h,
            symbols,
            m,
            epsilon,
            delta,
            sigma,
            n_rf,
            seed: random_seed,
        };
        let opts = Hyperparams {
            max_iter: 2,
            ..defaults(StrategyId::HybridRobustCiAltMin)
        };
        return solver_solution(hybrid_robust_ci_altmin(&problem, &opts));
    }

    let f_rf = match kind {
        BaselineKind::Random => {
            let mut rng = seeded(random_seed);
            ComplexMatrix::from_fn(n, n_rf, |_, _| Complex64::from_polar(1.0, uniform_phase(&mut rng)))
        }
        BaselineKind::PhaseMatchedHybrid => crate::solvers::phase_matched_analog(h, n_rf),
        BaselineKind::RzfHybrid => {
            let w = beams(rzf(h, reference, theta.ch.sigma2)?);
            ComplexMatrix::from_fn(n, n_rf, |i, r| {
                let z = w[(i, r % k)];
                Complex64::from_polar(1.0, if z.norm_sqr() == 0.0 { 0.0 } else { z.arg() })
            })
        }
        _ => unreachable!("filtered by baselines_for"),
    };
    let h_eff = h.matmul(&f_rf);
    // digital composite on the effective channel
    let v = if kind == BaselineKind::RzfHybrid {
        beams(rzf(&h_eff, reference, theta.ch.sigma2)?).mul_vec(symbols)
    } else {
        pseudo_inverse(&h_eff, DEFAULT_RANK_TOL)?.mul_vec(symbols)
    };
    let x = f_rf.mul_vec(&v);
    let s_hat = symbol_composite(symbols);
    let scale = match robust_ci_power_of(h, symbols, &x, m, epsilon, delta, sigma) {
        Some((power, _)) => (power / norm_sqr(&x)).sqrt(),
        // no scaling reaches the margin: radiate the reference power
        None => (reference.p_max() / norm_sqr(&x).max(f64::MIN_POSITIVE)).sqrt(),
    };
    let f_bb = align_baseband(&scale_vec(&v, scale), &s_hat);
    Ok(Solution::hybrid(f_rf, f_bb, n, n_rf, k)?)
}
