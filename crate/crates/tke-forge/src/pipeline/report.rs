//! Report rendering: the R^2 comparison table and the metrics CSV.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::ModelKind;
use crate::pipeline::EvaluationReport;
use crate::preprocess::SplitLabel;

/// Render an R^2 as a percentage with one decimal, rounded half away from
/// zero: 0.937 becomes "93.7", -0.05 becomes "-5.0".
pub fn format_pct(r2: f64) -> String {
    let scaled = (r2 * 1000.0).round() / 10.0;
    format!("{scaled:.1}")
}

/// The per-dataset R^2 comparison: one column per dataset, one row per
/// model, a test block then a validation block, percentages at one decimal.
pub fn report_table(
    report: &EvaluationReport,
    kinds: &[ModelKind],
    datasets: &[String],
) -> Result<String> {
    let cell = |kind: ModelKind, dataset: &str, split: SplitLabel| -> Result<String> {
        let eval = report
            .models
            .get(&(dataset.to_string(), kind))
            .ok_or_else(|| Error::MissingCell {
                model: kind.to_string(),
                dataset: dataset.to_string(),
            })?;
        Ok(format_pct(eval.metrics(split).r2))
    };

    let width = datasets
        .iter()
        .map(|d| d.len())
        .chain(std::iter::once(5))
        .max()
        .unwrap()
        .max(6);
    let mut out = String::new();
    let mut header = format!("{:width$}", "model");
    for d in datasets {
        let _ = write!(header, " {d:>width$}");
    }
    for (title, split) in [("Test (%)", SplitLabel::Test), ("Validation (%)", SplitLabel::Val)] {
        let _ = writeln!(out, "== {title} ==");
        let _ = writeln!(out, "{header}");
        for &kind in kinds {
            let _ = write!(out, "{:width$}", kind.as_str());
            for d in datasets {
                let _ = write!(out, " {:>width$}", cell(kind, d, split)?);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// `metrics.csv` body: one row per (model, dataset, split), full precision.
pub fn metrics_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("model,dataset,split,r2,mse,mae,n\n");
    for ((dataset, kind), eval) in &report.models {
        for split in SplitLabel::ALL {
            let m = eval.metrics(split);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                kind, dataset, split, m.r2, m.mse, m.mae, m.n
            );
        }
    }
    out
}
