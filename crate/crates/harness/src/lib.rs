//! Benchmark harness. Any mix of methods is run over seeded scenario
//! realizations, and the headline metric is aggregated per (scenario,
//! method, SNR) cell for the report writers.
//!
//! Every method in a sweep cell sees the same channel at realization index
//! `i` (common random numbers), and the aggregation runs in realization
//! order, so parallel and serial sweeps give identical tables.

mod error;
mod method;
mod report;
mod sweep;
mod table;

pub use error::HarnessError;
pub use method::{CustomMethod, Method, MethodSelector, PIPELINE_METHOD_NAME};
pub use report::{emit_report, render_markdown, Report, ReportFormat};
pub use sweep::{
    aggregate, evaluate, feasibility_matrix, realization_seed, sweep, sweep_records, Evaluation, Record, SweepConfig,
    DEFAULT_SNRS_DB,
};
pub use table::{FeasibilityCell, FeasibilityMatrix, MetricRow, MetricTable};

pub use precoding_core::metrics::{compute_metrics, feasibility_check, MetricKind, MetricSet, Violation};
