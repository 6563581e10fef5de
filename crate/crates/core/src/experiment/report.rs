use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentReport;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Csv,
        ReportFormat::Json,
        ReportFormat::Markdown,
    ];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidArgument(format!(
                "unknown report format {s:?}"
            ))),
        }
    }
}

fn full(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per variant with full-precision `{key}_mean`/`{key}_std` pairs;
/// undefined values are empty cells.
pub fn to_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "name".to_string(),
        "variant".into(),
        "d".into(),
        "runs".into(),
        "failures".into(),
    ];
    for c in &report.columns {
        header.push(format!("{}_mean", c.key));
        header.push(format!("{}_std", c.key));
    }
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![
            row.name.clone(),
            row.variant.key().to_string(),
            row.d.to_string(),
            row.runs.len().to_string(),
            row.failures.len().to_string(),
        ];
        for s in &row.summaries {
            rec.push(full(s.mean));
            rec.push(full(s.std));
        }
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Table with `mean ± std` cells rounded to three decimals.
pub fn to_markdown(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let mut header = vec!["Name".to_string(), "d".to_string()];
    header.extend(report.columns.iter().map(|c| c.header.clone()));
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in &report.rows {
        let mut cells = vec![row.name.clone(), row.d.to_string()];
        for s in &row.summaries {
            cells.push(match (s.mean, s.std) {
                (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3}"),
                _ => "n/a".into(),
            });
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    let failed: Vec<_> = report
        .rows
        .iter()
        .flat_map(|r| r.failures.iter().map(move |f| (r, f)))
        .collect();
    if !failed.is_empty() {
        out.push_str("\nFailed runs:\n\n");
        for (r, f) in failed {
            let _ = writeln!(out, "- {} (seed {}): {}", r.name, f.seed, f.error);
        }
    }
    out
}

pub fn to_json(report: &ExperimentReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn render(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Json => to_json(report),
        ReportFormat::Markdown => Ok(to_markdown(report)),
    }
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render(report, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
