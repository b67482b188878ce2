//! Aggregated results and their CSV form.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// One (scenario, method, SNR) cell.
///
/// `mean` and `std` are taken over the feasible realizations only and are
/// empty when none was feasible; `infeasible` counts the rest of the `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scenario_id: u32,
    pub method: String,
    pub snr_db: f64,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
    pub infeasible: usize,
}

impl MetricRow {
    pub fn feasible_rate(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.n - self.infeasible) as f64 / self.n as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

/// Column order of the CSV form.
pub const CSV_HEADER: [&str; 8] = [
    "scenario_id",
    "method",
    "snr_db",
    "metric",
    "mean",
    "std",
    "n",
    "infeasible",
];

impl MetricTable {
    pub fn row(&self, scenario_id: u32, method: &str, snr_db: f64) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.scenario_id == scenario_id && r.method == method && r.snr_db == snr_db)
    }

    pub fn methods(&self, scenario_id: u32) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in self.rows.iter().filter(|r| r.scenario_id == scenario_id) {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    pub fn scenario_ids(&self) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.scenario_id) {
                out.push(r.scenario_id);
            }
        }
        out
    }

    pub fn snrs(&self, scenario_id: u32) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in self.rows.iter().filter(|r| r.scenario_id == scenario_id) {
            if !out.contains(&r.snr_db) {
                out.push(r.snr_db);
            }
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wr.write_record(CSV_HEADER)?;
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, HarnessError> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(HarnessError::Csv(format!("unexpected header {header:?}")));
        }
        let rows = rd.deserialize().collect::<Result<Vec<MetricRow>, _>>()?;
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCell {
    pub method: String,
    pub snr_db: f64,
    /// Feasible realizations over `n`.
    pub rate: f64,
    pub n: usize,
}

/// Method × SNR grid of feasible-run rates for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMatrix {
    pub scenario_id: u32,
    pub cells: Vec<FeasibilityCell>,
}

impl FeasibilityMatrix {
    pub fn from_table(table: &MetricTable, scenario_id: u32) -> Self {
        let cells = table
            .rows
            .iter()
            .filter(|r| r.scenario_id == scenario_id)
            .map(|r| FeasibilityCell {
                method: r.method.clone(),
                snr_db: r.snr_db,
                rate: r.feasible_rate(),
                n: r.n,
            })
            .collect();
        Self { scenario_id, cells }
    }

    pub fn rate(&self, method: &str, snr_db: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.snr_db == snr_db)
            .map(|c| c.rate)
    }

    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.method.as_str()) {
                out.push(&c.method);
            }
        }
        out
    }

    pub fn snrs(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.snr_db) {
                out.push(c.snr_db);
            }
        }
        out
    }
}
