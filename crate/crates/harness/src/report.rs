//! Report artifacts.
//!
//! Markdown layout: one section per scenario, one row per method and one
//! column per SNR. In each column the best mean is bold and the runner-up
//! underlined. A cell with some infeasible realizations shows their count
//! next to the mean; a cell with no feasible realization shows "—" and the
//! count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use precoding_core::metrics::MetricKind;

use crate::error::HarnessError;
use crate::table::{FeasibilityMatrix, MetricRow, MetricTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Plotdata,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Plotdata];
}

#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Table(&'a MetricTable),
    Matrix(&'a FeasibilityMatrix),
}

fn fmt_value(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-2 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn fmt_snr(snr: f64) -> String {
    format!("{snr} dB")
}

/// File-name form of a method name.
fn slug(name: &str) -> String {
    let mut out = String::new();
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

/// Indices of the best and second-best rows among those with a mean.
fn podium(rows: &[&MetricRow], metric: Option<MetricKind>) -> (Option<usize>, Option<usize>) {
    let higher = metric.is_none_or(MetricKind::higher_is_better);
    let mut ranked: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.mean.map(|m| (i, m)))
        .collect();
    ranked.sort_by(|a, b| {
        let ord = a.1.total_cmp(&b.1);
        if higher {
            ord.reverse()
        } else {
            ord
        }
    });
    (ranked.first().map(|x| x.0), ranked.get(1).map(|x| x.0))
}

fn cell_text(r: &MetricRow, place: Option<u8>) -> String {
    let Some(mean) = r.mean else {
        return format!("— ({}/{} infeasible)", r.infeasible, r.n);
    };
    let v = fmt_value(mean);
    let v = match place {
        Some(1) => format!("**{v}**"),
        Some(2) => format!("<u>{v}</u>"),
        _ => v,
    };
    if r.infeasible > 0 {
        format!("{v} ({}/{} infeasible)", r.infeasible, r.n)
    } else {
        v
    }
}

pub fn render_markdown(table: &MetricTable) -> String {
    let mut out = String::from("# Results\n");
    for id in table.scenario_ids() {
        let rows: Vec<&MetricRow> = table.rows.iter().filter(|r| r.scenario_id == id).collect();
        let metric_label = rows.first().map_or("", |r| r.metric.as_str());
        let metric = MetricKind::from_label(metric_label);
        let direction = match metric {
            Some(m) if !m.higher_is_better() => ", lower is better",
            Some(_) => ", higher is better",
            None => "",
        };
        let snrs = table.snrs(id);
        let methods = table.methods(id);
        let _ = write!(out, "\n## Scenario {id:02} ({metric_label}{direction})\n\n| Method |");
        for s in &snrs {
            let _ = write!(out, " {} |", fmt_snr(*s));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(snrs.len()));
        out.push('\n');
        let places: Vec<(Option<usize>, Option<usize>)> = snrs
            .iter()
            .map(|s| {
                let col: Vec<&MetricRow> = methods
                    .iter()
                    .filter_map(|m| rows.iter().copied().find(|r| r.method == *m && r.snr_db == *s))
                    .collect();
                let (a, b) = podium(&col, metric);
                let name = |i: Option<usize>| i.map(|i| col[i].method.as_str());
                (
                    name(a).and_then(|n| methods.iter().position(|m| *m == n)),
                    name(b).and_then(|n| methods.iter().position(|m| *m == n)),
                )
            })
            .collect();
        for (mi, m) in methods.iter().enumerate() {
            let _ = write!(out, "| {m} |");
            for (si, s) in snrs.iter().enumerate() {
                let text = match rows.iter().find(|r| r.method == *m && r.snr_db == *s) {
                    None => String::new(),
                    Some(r) => {
                        let place = match places[si] {
                            (Some(b), _) if b == mi => Some(1),
                            (_, Some(b)) if b == mi => Some(2),
                            _ => None,
                        };
                        cell_text(r, place)
                    }
                };
                let _ = write!(out, " {text} |");
            }
            out.push('\n');
        }
    }
    out
}

fn render_matrix_markdown(m: &FeasibilityMatrix) -> String {
    let snrs = m.snrs();
    let mut out = format!("# Feasibility rate, scenario {:02}\n\n| Method |", m.scenario_id);
    for s in &snrs {
        let _ = write!(out, " {} |", fmt_snr(*s));
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(snrs.len()));
    out.push('\n');
    for method in m.methods() {
        let _ = write!(out, "| {method} |");
        for s in &snrs {
            let text = m.rate(method, *s).map_or(String::new(), |r| format!("{r:.2}"));
            let _ = write!(out, " {text} |");
        }
        out.push('\n');
    }
    out
}

fn write_file(path: PathBuf, text: &str) -> Result<PathBuf, HarnessError> {
    fs::write(&path, text)?;
    Ok(path)
}

/// One CSV per method, named after the method.
fn write_series(dir: &Path, header: &str, series: Vec<(String, Vec<String>)>) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut used: Vec<String> = Vec::new();
    let mut out = Vec::new();
    for (name, lines) in series {
        let base = slug(&name);
        let mut file = base.clone();
        let mut n = 2;
        while used.contains(&file) {
            file = format!("{base}-{n}");
            n += 1;
        }
        used.push(file.clone());
        let mut text = format!("{header}\n");
        for l in lines {
            text.push_str(&l);
            text.push('\n');
        }
        out.push(write_file(dir.join(format!("{file}.csv")), &text)?);
    }
    Ok(out)
}

/// Writes `report` in `format` under `dir` and returns the files written.
///
/// Tables go to `metrics.csv`, `metrics.md` and `plotdata/<method>.csv`
/// (columns `scenario_id,snr_db,mean,std,n,infeasible`). Feasibility
/// matrices go to `feasibility_sNN.csv`, `feasibility_sNN.md` and
/// `plotdata_feasibility_sNN/<method>.csv` (columns `snr_db,rate,n`).
pub fn emit_report(report: Report<'_>, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let empty = match report {
        Report::Table(t) => t.rows.is_empty(),
        Report::Matrix(m) => m.cells.is_empty(),
    };
    if empty {
        return Err(HarnessError::EmptyInput);
    }
    fs::create_dir_all(dir)?;
    match (report, format) {
        (Report::Table(t), ReportFormat::Csv) => Ok(vec![write_file(dir.join("metrics.csv"), &t.to_csv_string())?]),
        (Report::Table(t), ReportFormat::Markdown) => {
            Ok(vec![write_file(dir.join("metrics.md"), &render_markdown(t))?])
        }
        (Report::Table(t), ReportFormat::Plotdata) => {
            let mut series: Vec<(String, Vec<String>)> = Vec::new();
            for r in &t.rows {
                let line = format!(
                    "{},{},{},{},{},{}",
                    r.scenario_id,
                    r.snr_db,
                    r.mean.map_or(String::new(), |v| v.to_string()),
                    r.std.map_or(String::new(), |v| v.to_string()),
                    r.n,
                    r.infeasible
                );
                match series.iter_mut().find(|(m, _)| *m == r.method) {
                    Some((_, lines)) => lines.push(line),
                    None => series.push((r.method.clone(), vec![line])),
                }
            }
            write_series(
                &dir.join("plotdata"),
                "scenario_id,snr_db,mean,std,n,infeasible",
                series,
            )
        }
        (Report::Matrix(m), ReportFormat::Csv) => {
            let mut text = String::from("method,snr_db,rate,n\n");
            for c in &m.cells {
                let _ = writeln!(text, "{},{},{},{}", csv_field(&c.method), c.snr_db, c.rate, c.n);
            }
            Ok(vec![write_file(
                dir.join(format!("feasibility_s{:02}.csv", m.scenario_id)),
                &text,
            )?])
        }
        (Report::Matrix(m), ReportFormat::Markdown) => Ok(vec![write_file(
            dir.join(format!("feasibility_s{:02}.md", m.scenario_id)),
            &render_matrix_markdown(m),
        )?]),
        (Report::Matrix(m), ReportFormat::Plotdata) => {
            let series = m
                .methods()
                .into_iter()
                .map(|method| {
                    let lines = m
                        .cells
                        .iter()
                        .filter(|c| c.method == method)
                        .map(|c| format!("{},{},{}", c.snr_db, c.rate, c.n))
                        .collect();
                    (method.to_string(), lines)
                })
                .collect();
            write_series(
                &dir.join(format!("plotdata_feasibility_s{:02}", m.scenario_id)),
                "snr_db,rate,n",
                series,
            )
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
