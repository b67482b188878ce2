//! Monte-Carlo sweeps with common random numbers.

use rayon::prelude::*;

use precoding_core::baselines::family_of;
use precoding_core::metrics::{compute_metrics, feasibility_check, DEFAULT_FEASIBILITY_TOL};
use precoding_core::model::Solution;
use precoding_core::rng::mix_seed;
use precoding_core::scenarios::{Catalog, ScenarioDescriptor};
use precoding_pipeline::PipelineConfig;

use crate::error::HarnessError;
use crate::method::{Method, MethodSelector};
use crate::table::{FeasibilityMatrix, MetricRow, MetricTable};

pub const DEFAULT_SNRS_DB: [f64; 6] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0];

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scenario_ids: Vec<u32>,
    pub methods: Vec<MethodSelector>,
    pub snrs_db: Vec<f64>,
    pub n_mc: usize,
    pub seed: u64,
    pub feasibility_tol: f64,
    /// Worker threads; `None` uses one per processor.
    pub jobs: Option<usize>,
    pub pipeline: PipelineConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scenario_ids: (1..=9).collect(),
            methods: vec![MethodSelector::AllBaselines, MethodSelector::One(Method::Pipeline)],
            snrs_db: DEFAULT_SNRS_DB.to_vec(),
            n_mc: 100,
            seed: 0,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
            jobs: None,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl SweepConfig {
    fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.scenario_ids.is_empty() {
            return bad("no scenarios");
        }
        if self.methods.is_empty() {
            return bad("no methods");
        }
        if self.snrs_db.is_empty() || self.snrs_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR grid must be non-empty and finite");
        }
        if self.n_mc == 0 {
            return bad("n_mc must be at least 1");
        }
        if !(self.feasibility_tol.is_finite() && self.feasibility_tol >= 0.0) {
            return bad("feasibility tolerance must be a non-negative number");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1");
        }
        Ok(())
    }
}

/// Seed of realization `index`. It does not depend on the scenario, SNR or
/// method, so the channel at index `i` is shared by every method and, for
/// a fixed scenario, by every SNR.
pub fn realization_seed(seed: u64, index: usize) -> u64 {
    mix_seed(seed, index as u64)
}

/// Scored outcome of one method on one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub feasible: bool,
    pub value: Option<f64>,
}

/// Scores a solution: feasible means no constraint violated at `tol` and a
/// finite headline metric.
pub fn evaluate(solution: Option<&Solution>, theta: &ScenarioDescriptor, tol: f64) -> Evaluation {
    let Some(s) = solution else {
        return Evaluation {
            feasible: false,
            value: None,
        };
    };
    let value = compute_metrics(s, theta)
        .ok()
        .and_then(|m| family_of(theta).metric().value(&m))
        .filter(|v| v.is_finite());
    let clean = feasibility_check(s, theta, tol).is_ok_and(|v| v.is_empty());
    Evaluation {
        feasible: clean && value.is_some(),
        value,
    }
}

/// One method on one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub scenario_id: u32,
    pub snr_db: f64,
    pub realization: usize,
    pub method: String,
    pub metric: String,
    pub evaluation: Evaluation,
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| HarnessError::InvalidConfig(e.to_string()))
}

/// Every per-realization record of a sweep, ordered by scenario, SNR,
/// realization and method.
pub fn sweep_records(catalog: &Catalog, config: &SweepConfig) -> Result<Vec<Record>, HarnessError> {
    config.check()?;
    let mut tasks = Vec::new();
    for &id in &config.scenario_ids {
        let family = catalog.get(id)?.family;
        let methods = MethodSelector::expand(&config.methods, family);
        for &snr in &config.snrs_db {
            for i in 0..config.n_mc {
                tasks.push((id, snr, i, methods.clone()));
            }
        }
    }
    let run_task = |(id, snr, i, methods): &(u32, f64, usize, Vec<Method>)| -> Result<Vec<Record>, HarnessError> {
        let seed = realization_seed(config.seed, *i);
        let (task, theta) = catalog.instantiate(*id, *snr, seed)?;
        let family = family_of(&theta);
        let metric = family.metric().label().to_string();
        Ok(methods
            .iter()
            .map(|m| {
                let solution = m.run(&task, &theta, seed, &config.pipeline);
                Record {
                    scenario_id: *id,
                    snr_db: *snr,
                    realization: *i,
                    method: m.name(family),
                    metric: metric.clone(),
                    evaluation: evaluate(solution.as_ref(), &theta, config.feasibility_tol),
                }
            })
            .collect())
    };
    let chunks: Vec<Result<Vec<Record>, HarnessError>> =
        pool(config.jobs)?.install(|| tasks.par_iter().map(run_task).collect());
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Aggregates records into cells. Rows come out grouped by scenario, then
/// method in first-seen order, then SNR in first-seen order.
pub fn aggregate(records: &[Record]) -> MetricTable {
    let mut keys: Vec<(u32, String, f64, String)> = Vec::new();
    for r in records {
        let k = (r.scenario_id, r.method.clone(), r.snr_db, r.metric.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    // stable sort by scenario keeps method and SNR first-seen order
    let method_rank = |id: u32, m: &str| {
        records
            .iter()
            .filter(|r| r.scenario_id == id)
            .position(|r| r.method == m)
            .unwrap_or(usize::MAX)
    };
    let scenario_rank = |id: u32| records.iter().position(|r| r.scenario_id == id).unwrap_or(usize::MAX);
    keys.sort_by_key(|(id, m, _, _)| (scenario_rank(*id), method_rank(*id, m)));
    let rows = keys
        .into_iter()
        .map(|(id, method, snr, metric)| {
            let mut cell: Vec<&Record> = records
                .iter()
                .filter(|r| r.scenario_id == id && r.method == method && r.snr_db == snr)
                .collect();
            cell.sort_by_key(|r| r.realization);
            let values: Vec<f64> = cell
                .iter()
                .filter(|r| r.evaluation.feasible)
                .filter_map(|r| r.evaluation.value)
                .collect();
            let (mean, std) = if values.is_empty() {
                (None, None)
            } else {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                (Some(mean), Some(var.sqrt()))
            };
            MetricRow {
                scenario_id: id,
                method,
                snr_db: snr,
                metric,
                mean,
                std,
                n: cell.len(),
                infeasible: cell.len() - values.len(),
            }
        })
        .collect();
    MetricTable { rows }
}

/// Runs the sweep and aggregates it. Method failures count as infeasible
/// realizations and never abort the sweep.
pub fn sweep(catalog: &Catalog, config: &SweepConfig) -> Result<MetricTable, HarnessError> {
    Ok(aggregate(&sweep_records(catalog, config)?))
}

/// Feasibility rates of the selected methods on one scenario.
pub fn feasibility_matrix(
    catalog: &Catalog,
    scenario_id: u32,
    config: &SweepConfig,
) -> Result<FeasibilityMatrix, HarnessError> {
    let config = SweepConfig {
        scenario_ids: vec![scenario_id],
        ..config.clone()
    };
    Ok(FeasibilityMatrix::from_table(&sweep(catalog, &config)?, scenario_id))
}
