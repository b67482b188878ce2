//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use precoding_core::baselines::{baselines_for, run_baseline, BaselineKind};
use precoding_core::metrics::compute_metrics;
use precoding_core::scenarios::{instantiate_scenario, Catalog, Family, ScenarioDescriptor};
use precoding_core::solvers::{
    exhaustive_oracle, solve, OracleKind, SolveOptions, SolverError, SolverOutcome, SolverStrategy, StrategyId,
};
use precoding_harness::{
    sweep, sweep_records, FeasibilityMatrix, Method, MethodSelector, SweepConfig, DEFAULT_SNRS_DB, PIPELINE_METHOD_NAME,
};
use precoding_pipeline::{run_pipeline, FaultInjection, FeedbackStatus, PipelineConfig, RuleBackend, TerminatedBy};

use common::{read, Sandbox};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, budget: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < budget, || format!("took {t:.1?}, budget {budget:?}"))?;
    Ok(t)
}

fn one(m: Method) -> MethodSelector {
    MethodSelector::One(m)
}

fn outcome(id: StrategyId, theta: &ScenarioDescriptor) -> Result<SolverOutcome, SolverError> {
    let opts = SolveOptions::new(SolverStrategy::with_defaults(id).unwrap().hyperparams);
    match solve(id, theta, &opts) {
        Err(SolverError::NotConverged { outcome }) => Ok(*outcome),
        other => other,
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let step = 10f64.powf(0.25);
    let cat = Catalog::default();
    let mut methods: Vec<MethodSelector> = [Family::ConstantEnvelopeCi, Family::OneBitCi]
        .iter()
        .flat_map(|f| baselines_for(*f).iter())
        .filter(|k| !k.is_randomized())
        .map(|k| one(Method::Baseline(*k)))
        .collect();
    methods.push(one(Method::Pipeline));
    let cfg = SweepConfig {
        scenario_ids: vec![2, 3],
        methods,
        n_mc: 10,
        seed: 1,
        ..SweepConfig::default()
    };
    let table = sweep(&cat, &cfg).map_err(|e| e.to_string())?;
    let mut ratios = 0;
    for id in [2, 3] {
        for m in table.methods(id) {
            for w in DEFAULT_SNRS_DB.windows(2) {
                let mean = |s: f64| table.row(id, m, s).and_then(|r| r.mean);
                let (Some(a), Some(b)) = (mean(w[0]), mean(w[1])) else {
                    return Err(format!("scenario {id} {m}: missing mean"));
                };
                ensure((b / a - step).abs() <= 1e-9 * step, || {
                    format!("scenario {id} {m} {}→{} dB: ratio {}", w[0], w[1], b / a)
                })?;
                ratios += 1;
            }
        }
    }
    let t = within(start, Duration::from_secs(30))?;
    Ok(format!(
        "{ratios} consecutive ratios equal 10^0.25 within 1e-9 in {t:.1?}"
    ))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let cfg = SweepConfig {
        scenario_ids: vec![1],
        methods: vec![
            one(Method::Solver(StrategyId::SinrDualityPowerMin)),
            one(Method::Baseline(BaselineKind::Zf)),
        ],
        n_mc: 100,
        seed: 2,
        feasibility_tol: 1e-6,
        ..SweepConfig::default()
    };
    let records = sweep_records(&Catalog::default(), &cfg).map_err(|e| e.to_string())?;
    ensure(records.len() == 2 * 6 * 100, || format!("{} records", records.len()))?;
    for pair in records.chunks(2) {
        let (d, z) = (&pair[0], &pair[1]);
        let where_ = || format!("snr {} realization {}", d.snr_db, d.realization);
        ensure(d.evaluation.feasible && z.evaluation.feasible, || {
            format!("{}: infeasible", where_())
        })?;
        let (dv, zv) = (d.evaluation.value.unwrap(), z.evaluation.value.unwrap());
        ensure(dv <= zv * (1.0 + 1e-12), || {
            format!("{}: duality {dv} > ZF {zv}", where_())
        })?;
    }
    let t = within(start, Duration::from_secs(60))?;
    Ok(format!(
        "duality ≤ ZF and both feasible on 600/600 realizations in {t:.1?}"
    ))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let cat = |json: &str| Catalog::with_overrides_json(json).unwrap();

    let c = cat(r#"[{"scenario_id": 1, "family": "MuMimoPowerMin", "n_t": 2, "k": 2}]"#);
    let mut compared = 0;
    for seed in 0..50 {
        let (_, theta) = c.instantiate(1, 10.0, seed).unwrap();
        let s = solve(
            StrategyId::SinrDualityPowerMin,
            &theta,
            &SolveOptions::new(
                SolverStrategy::with_defaults(StrategyId::SinrDualityPowerMin)
                    .unwrap()
                    .hyperparams,
            ),
        );
        match (s, exhaustive_oracle(OracleKind::PowerMinTwoUserGrid, &theta, 200)) {
            (Ok(s), Ok(o)) => {
                let rel = (s.objective - o.objective).abs() / o.objective;
                ensure(rel <= 1e-3, || format!("(a) seed {seed}: relative gap {rel}"))?;
                compared += 1;
            }
            (Err(_), Err(_)) => {}
            _ => return Err(format!("(a) seed {seed}: solver and oracle disagree on feasibility")),
        }
    }

    let c = cat(r#"[{"scenario_id": 3, "family": "OneBitCi", "n_t": 6}]"#);
    let mut greedy_wins = 0;
    for seed in 0..100 {
        let (_, theta) = c.instantiate(3, 10.0, seed).unwrap();
        let margin =
            |s: &precoding_core::model::Solution| compute_metrics(s, &theta).unwrap().normalized_margin.unwrap();
        let oracle = exhaustive_oracle(OracleKind::OneBitEnumeration, &theta, 0)
            .unwrap()
            .objective;
        let greedy = margin(&outcome(StrategyId::OneBitGreedyCD, &theta).unwrap().solution);
        let mrt = margin(&run_baseline(BaselineKind::Mrt, &theta, seed).unwrap());
        ensure(oracle >= greedy - 1e-9, || {
            format!("(b) seed {seed}: enumeration {oracle} < greedy {greedy}")
        })?;
        greedy_wins += usize::from(greedy >= mrt - 1e-9);
    }
    ensure(greedy_wins >= 95, || {
        format!("(b) greedy ≥ quantized MRT on {greedy_wins}/100")
    })?;

    let c = cat(r#"[{"scenario_id": 2, "family": "ConstantEnvelopeCi", "n_t": 3}]"#);
    let mut close = 0;
    for seed in 0..100 {
        let (_, theta) = c.instantiate(2, 10.0, seed).unwrap();
        let oracle = exhaustive_oracle(OracleKind::ConstantEnvelopeGrid, &theta, 64)
            .unwrap()
            .objective;
        let cd = outcome(StrategyId::CePhaseCoordinateDescent, &theta).unwrap().objective;
        close += usize::from(cd >= oracle - 0.01 * oracle.abs());
    }
    ensure(close >= 95, || format!("(c) within 1% on {close}/100"))?;
    let t = within(start, Duration::from_secs(300))?;
    Ok(format!(
        "(a) {compared}/50 within 1e-3, (b) enumeration bounds greedy on 100/100 and greedy ≥ MRT on {greedy_wins}/100, (c) {close}/100 within 1% in {t:.1?}"
    ))
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let cases = [
        (StrategyId::WmmseSumRate, 8, true),
        (StrategyId::CrSumRateProjAscent, 6, true),
        (StrategyId::OneBitGreedyCD, 3, true),
        (StrategyId::HybridRobustCiAltMin, 9, false),
    ];
    for (id, scenario, increasing) in cases {
        for seed in 0..100u64 {
            let snr = DEFAULT_SNRS_DB[(seed % 6) as usize];
            let (_, theta) = instantiate_scenario(scenario, snr, seed).unwrap();
            let trace = outcome(id, &theta).map_err(|e| format!("{id} seed {seed}: {e}"))?.trace;
            ensure(!trace.is_empty(), || format!("{id} seed {seed}: empty trace"))?;
            for w in trace.windows(2) {
                let step = if increasing { w[1] - w[0] } else { w[0] - w[1] };
                ensure(step >= -1e-8 * w[0].abs().max(1.0), || {
                    format!("{id} seed {seed}: {} → {}", w[0], w[1])
                })?;
            }
        }
    }
    let t = within(start, Duration::from_secs(120))?;
    Ok(format!("4 solvers × 100 traces monotone in {t:.1?}"))
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let cat = Catalog::default();
    let cfg = SweepConfig {
        methods: vec![one(Method::Pipeline)],
        n_mc: 20,
        seed: 5,
        feasibility_tol: 1e-6,
        ..SweepConfig::default()
    };
    let table = sweep(&cat, &cfg).map_err(|e| e.to_string())?;
    let mut cells = 0;
    for id in 1..=9 {
        let m = FeasibilityMatrix::from_table(&table, id);
        for snr in DEFAULT_SNRS_DB {
            let rate = m.rate(PIPELINE_METHOD_NAME, snr);
            ensure(rate == Some(1.0), || format!("scenario {id} snr {snr}: rate {rate:?}"))?;
            cells += 1;
        }
    }
    let t = within(start, Duration::from_secs(300))?;
    Ok(format!("{cells}/54 cells at rate 1.0 over 20 realizations in {t:.1?}"))
}

fn criterion_6() -> Check {
    let faults = [
        (
            8,
            FaultInjection {
                initial_max_iter: Some(1),
                postprocessing: vec![],
            },
            FeedbackStatus::NotConverged,
        ),
        (
            1,
            FaultInjection {
                initial_max_iter: None,
                postprocessing: vec!["inflate:1.05".into()],
            },
            FeedbackStatus::Infeasible,
        ),
    ];
    let mut revisions = 0;
    for (scenario, fault, first) in faults {
        let config = PipelineConfig {
            fault: Some(fault),
            ..PipelineConfig::default()
        };
        // at 10 dB the iteration cap always bites; at high SNR a solver may
        // legitimately converge in one step and hide the fault
        for seed in 0..20u64 {
            let (task, theta) = instantiate_scenario(scenario, 10.0, seed).unwrap();
            let r = run_pipeline(&task, &theta, &config, &RuleBackend).result;
            let tag = || format!("scenario {scenario} seed {seed}");
            ensure(r.feedbacks[0].status == first, || {
                format!("{}: first status {:?}", tag(), r.feedbacks[0].status)
            })?;
            ensure(r.terminated_by == TerminatedBy::Accepted, || {
                format!("{}: {:?}", tag(), r.terminated_by)
            })?;
            ensure(r.plans.len() <= 6, || format!("{}: {} revisions", tag(), r.plans.len()))?;
            revisions = revisions.max(r.plans.len() - 1);
        }
    }
    Ok(format!("40/40 faulted runs accepted, at most {revisions} refinements"))
}

fn criterion_7() -> Check {
    let cfg = SweepConfig {
        scenario_ids: vec![8],
        methods: ["WmmseSumRate", "zf", "rzf", "slnr"]
            .iter()
            .map(|m| MethodSelector::parse(m).unwrap())
            .collect(),
        n_mc: 100,
        seed: 7,
        ..SweepConfig::default()
    };
    let table = sweep(&Catalog::default(), &cfg).map_err(|e| e.to_string())?;
    let mut margin = f64::INFINITY;
    for snr in DEFAULT_SNRS_DB {
        let mean = |m: &str| table.row(8, m, snr).and_then(|r| r.mean).unwrap_or(f64::NAN);
        let wmmse = mean("WmmseSumRate");
        let best = ["ZF", "RZF", "Plain SLNR"]
            .map(mean)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(wmmse >= best, || format!("snr {snr}: WMMSE {wmmse} < {best}"))?;
        margin = margin.min(wmmse - best);
    }
    Ok(format!(
        "WMMSE ahead of max(ZF, RZF, SLNR) at all 6 SNRs, smallest mean lead {margin:.2e} bps/Hz"
    ))
}

fn criterion_8() -> Check {
    let cat = Catalog::default();
    let cfg = SweepConfig {
        scenario_ids: vec![1, 3, 8],
        n_mc: 5,
        seed: 8,
        ..SweepConfig::default()
    };
    let a = sweep(&cat, &cfg).map_err(|e| e.to_string())?.to_csv_string();
    let b = sweep(&cat, &SweepConfig { jobs: Some(1), ..cfg })
        .map_err(|e| e.to_string())?
        .to_csv_string();
    ensure(a == b, || "sweep CSV differs between runs".into())?;

    let sb = Sandbox::new();
    for scenario in 1..=9u32 {
        let s = scenario.to_string();
        let run = || {
            let o = sb.run(&["--seed", "8", "run", "--scenario", &s, "--snr", "15"]);
            (o.code, o.json())
        };
        let ((ca, ja), (cb, jb)) = (run(), run());
        ensure(ca == 0 && cb == 0, || {
            format!("scenario {scenario}: exit codes {ca} {cb}")
        })?;
        let path = |j: &serde_json::Value| std::path::PathBuf::from(j["transcript"].as_str().unwrap());
        ensure(read(&path(&ja)) == read(&path(&jb)), || {
            format!("scenario {scenario}: transcripts differ")
        })?;
        let r = sb.run(&["replay", path(&ja).to_str().unwrap()]);
        let rj = r.json();
        ensure(r.code == 0 && rj["reproduced"] == true, || {
            format!("scenario {scenario}: replay {}", r.stdout)
        })?;
        ensure(
            rj["terminated_by"] == ja["terminated_by"] && rj["final_objective"] == ja["objective"],
            || format!("scenario {scenario}: replay summary {rj} vs run {ja}"),
        )?;
    }
    ensure(sb.requests() == 0, || "rule-backend runs made network requests".into())?;
    Ok("identical sweep CSV and transcripts per seed; 9/9 replays reproduce every feedback".into())
}

fn criterion_9() -> Check {
    let start = Instant::now();
    let table = sweep(&Catalog::default(), &SweepConfig::default()).map_err(|e| e.to_string())?;
    ensure(table.rows.iter().all(|r| r.n == 100), || {
        "cells with fewer than 100 realizations".into()
    })?;
    let t = within(start, Duration::from_secs(600))?;
    Ok(format!("{} cells × 100 realizations in {t:.1?}", table.rows.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("margin scaling law", criterion_1),
        ("power-min ordering", criterion_2),
        ("oracle equivalence", criterion_3),
        ("monotone traces", criterion_4),
        ("pipeline feasibility", criterion_5),
        ("closed-loop refinement", criterion_6),
        ("sum-rate dominance", criterion_7),
        ("determinism and replay", criterion_8),
        ("desk-scale budget", criterion_9),
    ];
    // honor `cargo test -- <filter>` by criterion number
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if filter
            .as_deref()
            .is_some_and(|f| f != n.to_string() && !name.contains(f))
        {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("criterion {n} ({name}): PASS: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
