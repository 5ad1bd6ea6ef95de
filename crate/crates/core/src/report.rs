//! Report files: the per-cell grid CSV, the per-weight summary, a
//! metric x n table of CV MAE by weight, the full JSON report and the
//! best-configuration artifact consumed by `recommend`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvaluationReport;
use crate::predict::{format_alpha, HybridConfig};

pub const GRID_CSV: &str = "grid_report.csv";
pub const WEIGHTS_CSV: &str = "weights_analysis.csv";
pub const MAE_TABLE_CSV: &str = "mae_table.csv";
pub const REPORT_JSON: &str = "report.json";
pub const BEST_CONFIG_JSON: &str = "best_config.json";

/// The selected model, persisted for later recommendation runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestConfig {
    pub config: HybridConfig,
    pub cv_mae: f64,
    pub test_mae: f64,
    pub dataset_fingerprint: String,
    pub seed: u64,
}

impl BestConfig {
    pub fn from_report(report: &EvaluationReport) -> Self {
        Self {
            config: report.best,
            cv_mae: report.best_row.cv_mae,
            test_mae: report.best_row.test_mae,
            dataset_fingerprint: report.metadata.dataset_fingerprint.clone(),
            seed: report.metadata.seed,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flush<W: Write>(wtr: &mut csv::Writer<W>, what: &str) -> Result<()> {
    wtr.flush().map_err(|e| Error::io(what, e))
}

/// One row per grid cell. `mae` is the cross-validated MAE used for model
/// selection; the remaining figures come from the held-out test users.
pub fn write_grid_csv<W: Write>(report: &EvaluationReport, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "metric",
        "n",
        "alpha",
        "mae",
        "rel_err",
        "precision_at_k",
        "recall_at_k",
        "test_mae",
    ])?;
    for row in &report.rows {
        wtr.write_record([
            row.metric.to_string(),
            row.n_neighbors.to_string(),
            row.alpha.to_string(),
            row.cv_mae.to_string(),
            opt(row.relative_error),
            opt(row.precision_at_k),
            opt(row.recall_at_k),
            row.test_mae.to_string(),
        ])?;
    }
    flush(&mut wtr, GRID_CSV)
}

pub fn write_weights_csv<W: Write>(report: &EvaluationReport, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["alpha", "alpha_label", "metric", "n", "mae"])?;
    for w in &report.weights_analysis {
        wtr.write_record([
            w.alpha.to_string(),
            w.alpha_label.clone(),
            w.metric.to_string(),
            w.n_neighbors.to_string(),
            w.cv_mae.to_string(),
        ])?;
    }
    flush(&mut wtr, WEIGHTS_CSV)
}

/// CV MAE pivoted into one row per (metric, n) and one column per weight.
pub fn write_mae_table_csv<W: Write>(report: &EvaluationReport, writer: W) -> Result<()> {
    let grid = &report.metadata.grid;
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["similarity".to_string(), "n".to_string()];
    header.extend(grid.alphas.iter().map(|a| format!("MAE_{}", format_alpha(*a))));
    wtr.write_record(&header)?;
    for chunk in report.rows.chunks(grid.alphas.len()) {
        let mut record = vec![chunk[0].metric.to_string(), chunk[0].n_neighbors.to_string()];
        record.extend(chunk.iter().map(|r| format!("{:.4}", r.cv_mae)));
        wtr.write_record(&record)?;
    }
    flush(&mut wtr, MAE_TABLE_CSV)
}

pub fn report_json(report: &EvaluationReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn render<F: FnOnce(&mut Vec<u8>) -> Result<()>>(f: F) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes every report file into `dir` (created if needed) and returns the
/// paths written.
pub fn write_report_files(report: &EvaluationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let best = serde_json::to_string_pretty(&BestConfig::from_report(report))? + "\n";
    Ok(vec![
        write_file(dir, GRID_CSV, &render(|b| write_grid_csv(report, b))?)?,
        write_file(dir, WEIGHTS_CSV, &render(|b| write_weights_csv(report, b))?)?,
        write_file(dir, MAE_TABLE_CSV, &render(|b| write_mae_table_csv(report, b))?)?,
        write_file(dir, REPORT_JSON, report_json(report)?.as_bytes())?,
        write_file(dir, BEST_CONFIG_JSON, best.as_bytes())?,
    ])
}
