use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

use super::job::EstimationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes one row per method, in job order. Reference columns appear only when the survey
/// supplied the outcome.
pub fn emit_report<W: Write>(report: &EstimationReport, format: ReportFormat, mut out: W) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::EmptyInput("report has no results"));
    }
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
        }
        ReportFormat::Csv => {
            let with_ref = report.reference.is_some();
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["method", "estimate", "variance", "ci_low", "ci_high"];
            if with_ref {
                header.extend(["reference", "pct_rd", "mse"]);
            }
            header.extend(["warnings", "weight_min", "weight_max", "weight_cv_pct"]);
            w.write_record(&header).map_err(csv_err)?;
            for r in &report.rows {
                let mut rec = vec![
                    r.method.to_string(),
                    r.estimate.to_string(),
                    opt(r.variance),
                    opt(r.ci_low),
                    opt(r.ci_high),
                ];
                if with_ref {
                    rec.extend([opt(report.reference), opt(r.pct_rd), opt(r.mse)]);
                }
                rec.extend([
                    r.warnings.join(";"),
                    r.weights.min.to_string(),
                    r.weights.max.to_string(),
                    r.weights.cv_pct.to_string(),
                ]);
                w.write_record(&rec).map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Pseudo-weights as a table: a `row` index column and one column per method.
pub fn write_weights<W: Write>(report: &EstimationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string()];
    header.extend(report.weights.iter().map(|(m, _)| m.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..report.n_cohort {
        let mut rec = vec![i.to_string()];
        rec.extend(report.weights.iter().map(|(_, v)| v[i].to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

/// Single-line JSON description of an error for machine consumption.
pub fn error_line(e: &Error) -> String {
    serde_json::to_string(&ErrorLine {
        error: e.kind(),
        message: e.to_string(),
    })
    .expect("plain strings serialize")
}
