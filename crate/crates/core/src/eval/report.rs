use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::backtest::BacktestReport;
use super::metrics::MetricSet;
use super::plot::render_fold_svg;
use crate::error::Result;

pub const REPORT_FILE: &str = "report.json";
pub const METRICS_FILE: &str = "metrics.csv";

fn row(out: &mut String, fold: &str, model: &str, m: &MetricSet) {
    let rmae = m.rmae.map(|v| v.to_string()).unwrap_or_default();
    let _ = writeln!(out, "{fold},{model},{},{},{rmae}", m.mae, m.rmse);
}

/// Flat per-fold metrics followed by pooled rows (fold column `pooled`).
pub fn metrics_csv(report: &BacktestReport) -> String {
    let mut out = String::from("fold,model,mae,rmse,rmae\n");
    for f in &report.folds {
        for (m, metrics) in &f.metrics {
            row(&mut out, &f.fold.to_string(), m.as_str(), metrics);
        }
    }
    for (m, metrics) in &report.pooled {
        row(&mut out, "pooled", m.as_str(), metrics);
    }
    out
}

/// Writes `report.json`, `metrics.csv` and one SVG per fold into `dir`; returns the paths.
pub fn write_report(report: &BacktestReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join(REPORT_FILE);
    std::fs::write(&json, serde_json::to_string_pretty(report)?)?;
    written.push(json);
    let csv = dir.join(METRICS_FILE);
    std::fs::write(&csv, metrics_csv(report))?;
    written.push(csv);
    for f in &report.folds {
        let path = dir.join(format!("{}_fold{}.svg", report.metadata.region, f.fold));
        std::fs::write(&path, render_fold_svg(f))?;
        written.push(path);
    }
    Ok(written)
}
