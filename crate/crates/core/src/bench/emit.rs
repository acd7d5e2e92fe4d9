//! Report rendering: the comparison table and the plot-ready CSV files.

use crate::bench::run::BenchReport;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// One row of `predictions.csv`, in physical units. `month_index` is the
/// target month's 0-based position in the input series, so `actual` can be
/// joined back to the raw data exactly.
#[derive(Clone, Debug)]
pub struct PredictionRow {
    pub month_index: usize,
    pub actual: f64,
    pub mars_pred: f64,
    pub ann_pred: f64,
}

/// Renders the comparison table with per-model timing for the console.
pub fn emit_table(report: &BenchReport) -> String {
    render_table(report, true)
}

/// Renders the same table without the timing column; this is what lands in
/// `report.txt`, so repeated runs produce byte-identical files.
pub fn emit_table_stable(report: &BenchReport) -> String {
    render_table(report, false)
}

fn render_table(report: &BenchReport, with_seconds: bool) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:>11} {:>10} {:>11}", "Model", "Train RMSE", "Test RMSE", "Iterations");
    if with_seconds {
        let _ = write!(out, " {:>8}", "Seconds");
    }
    out.push('\n');
    for m in &report.models {
        let iterations = m
            .iterations
            .map_or_else(|| "-".to_string(), |n| n.to_string());
        let _ = write!(
            out,
            "{:<10} {:>11.4} {:>10.4} {:>11}",
            m.name, m.train_rmse, m.test_rmse, iterations
        );
        if with_seconds {
            let _ = write!(out, " {:>8.1}", m.wall_seconds);
        }
        out.push('\n');
    }
    out
}

/// Writes the three plot CSVs: the training curve (`epoch,mse`), the basis
/// sweep (`max_basis,test_rmse`), and test-period predictions in physical
/// units (`month_index,actual,mars_pred,ann_pred`).
pub fn emit_plot_csvs(report: &BenchReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let curve_path = out_dir.join("train_curve.csv");
    let mut curve = String::from("epoch,mse\n");
    for (i, mse) in report.ann_curve.iter().enumerate() {
        let _ = writeln!(curve, "{},{}", i + 1, mse);
    }
    write_file(&curve_path, &curve)?;

    let sweep_path = out_dir.join("sweep.csv");
    let mut sweep = String::from("max_basis,test_rmse\n");
    for p in &report.sweep {
        let _ = writeln!(sweep, "{},{}", p.max_basis, p.test_rmse);
    }
    write_file(&sweep_path, &sweep)?;

    let pred_path = out_dir.join("predictions.csv");
    let mut pred = String::from("month_index,actual,mars_pred,ann_pred\n");
    for r in &report.predictions {
        let _ = writeln!(
            pred,
            "{},{},{},{}",
            r.month_index, r.actual, r.mars_pred, r.ann_pred
        );
    }
    write_file(&pred_path, &pred)?;

    Ok(vec![curve_path, sweep_path, pred_path])
}

/// Writes `report.txt`, `report.json` and the plot CSVs; returns the file
/// names in the output directory.
pub fn write_report_files(report: &BenchReport, out_dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", out_dir.display())))?;

    write_file(&out_dir.join("report.txt"), &emit_table_stable(report))?;

    let mut named = report.clone();
    named.files = vec![
        "report.txt".to_string(),
        "report.json".to_string(),
        "train_curve.csv".to_string(),
        "sweep.csv".to_string(),
        "predictions.csv".to_string(),
    ];
    let json =
        serde_json::to_string_pretty(&named).expect("report serialization cannot fail");
    write_file(&out_dir.join("report.json"), &format!("{json}\n"))?;

    emit_plot_csvs(report, out_dir)?;
    Ok(named.files)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}
