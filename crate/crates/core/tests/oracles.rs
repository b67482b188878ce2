//! Solvers against brute-force references on small instances.

use precoding_core::baselines::{run_baseline, BaselineKind};
use precoding_core::metrics::{compute_metrics, feasibility_check};
use precoding_core::scenarios::Catalog;
use precoding_core::solvers::{exhaustive_oracle, OracleKind};
use precoding_core::solvers::{solve, SolveOptions, SolverError, SolverOutcome, SolverStrategy, StrategyId};

fn catalog(json: &str) -> Catalog {
    Catalog::with_overrides_json(json).unwrap()
}

/// Runs a solver with defaults, keeping the partial result of a run that
/// hit its iteration limit.
fn run(id: StrategyId, theta: &precoding_core::scenarios::ScenarioDescriptor) -> SolverOutcome {
    match solve(id, theta, &defaults(id)) {
        Ok(o) => o,
        Err(SolverError::NotConverged { outcome }) => *outcome,
        Err(e) => panic!("{id}: {e}"),
    }
}

fn defaults(id: StrategyId) -> SolveOptions {
    SolveOptions::new(SolverStrategy::with_defaults(id).unwrap().hyperparams)
}

#[test]
fn duality_matches_two_user_grid_oracle() {
    let cat = catalog(r#"[{"scenario_id": 1, "family": "MuMimoPowerMin", "n_t": 2, "k": 2}]"#);
    let mut checked = 0;
    for seed in 0..50 {
        let (_, theta) = cat.instantiate(1, 10.0, seed).unwrap();
        let solver = solve(
            StrategyId::SinrDualityPowerMin,
            &theta,
            &defaults(StrategyId::SinrDualityPowerMin),
        );
        let oracle = exhaustive_oracle(OracleKind::PowerMinTwoUserGrid, &theta, 200);
        match (solver, oracle) {
            (Ok(s), Ok(o)) => {
                assert!(feasibility_check(&s.solution, &theta, 1e-6).unwrap().is_empty());
                let rel = (s.objective - o.objective) / o.objective;
                assert!(
                    rel <= 1e-3,
                    "seed {seed}: duality {} oracle {}",
                    s.objective,
                    o.objective
                );
                assert!(
                    rel >= -1e-3,
                    "seed {seed}: duality {} beats the oracle {} by too much",
                    s.objective,
                    o.objective
                );
                checked += 1;
            }
            (Err(_), Err(_)) => {}
            (s, o) => panic!(
                "seed {seed}: solver {:?} vs oracle {:?}",
                s.map(|x| x.objective),
                o.map(|x| x.objective)
            ),
        }
    }
    assert!(checked >= 45, "only {checked} feasible instances");
}

#[test]
fn one_bit_enumeration_bounds_greedy_and_greedy_beats_quantized_mrt() {
    let cat = catalog(r#"[{"scenario_id": 3, "family": "OneBitCi", "n_t": 6}]"#);
    let mut greedy_wins = 0;
    for seed in 0..100 {
        let (_, theta) = cat.instantiate(3, 10.0, seed).unwrap();
        let oracle = exhaustive_oracle(OracleKind::OneBitEnumeration, &theta, 0)
            .unwrap()
            .objective;
        let greedy = run(StrategyId::OneBitGreedyCD, &theta);
        let greedy_margin = compute_metrics(&greedy.solution, &theta)
            .unwrap()
            .normalized_margin
            .unwrap();
        assert!(
            oracle >= greedy_margin - 1e-9,
            "seed {seed}: oracle {oracle} < greedy {greedy_margin}"
        );
        let mrt = run_baseline(BaselineKind::Mrt, &theta, seed).unwrap();
        let mrt_margin = compute_metrics(&mrt, &theta).unwrap().normalized_margin.unwrap();
        if greedy_margin >= mrt_margin - 1e-9 {
            greedy_wins += 1;
        }
    }
    assert!(greedy_wins >= 95, "greedy beat quantized MRT on {greedy_wins}/100");
}

#[test]
fn constant_envelope_descent_is_near_the_grid_optimum() {
    let cat = catalog(r#"[{"scenario_id": 2, "family": "ConstantEnvelopeCi", "n_t": 3}]"#);
    let mut close = 0;
    for seed in 0..100 {
        let (_, theta) = cat.instantiate(2, 10.0, seed).unwrap();
        let oracle = exhaustive_oracle(OracleKind::ConstantEnvelopeGrid, &theta, 64)
            .unwrap()
            .objective;
        let cd = run(StrategyId::CePhaseCoordinateDescent, &theta).objective;
        if cd >= oracle - 0.01 * oracle.abs() {
            close += 1;
        }
    }
    assert!(close >= 95, "within 1% on {close}/100");
}

#[test]
fn secrecy_solver_matches_the_null_space_grid() {
    let cat = catalog(r#"[{"scenario_id": 4, "family": "SecrecyMulticast", "n_t": 3, "k": 2}]"#);
    let mut close = 0;
    for seed in 0..30 {
        let (_, theta) = cat.instantiate(4, 10.0, seed).unwrap();
        let Ok(o) = exhaustive_oracle(OracleKind::SecrecyNullspaceGrid, &theta, 90) else {
            continue;
        };
        let s = run(StrategyId::SecrecyNullspaceMaxMin, &theta);
        if s.objective >= o.objective - 0.01 * o.objective.abs() {
            close += 1;
        }
    }
    assert!(close >= 27, "within 1% on {close}/30");
}
