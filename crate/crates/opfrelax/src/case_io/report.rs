//! Report rendering: JSON for machines, CSV for spreadsheets.
//!
//! Both formats carry the same rows: the nonconvex reference solve
//! first, then one row per relaxation, then the copper plate. In CSV,
//! a gap is printed only when the producing solve reached optimality —
//! a bound from a stopped solver is still listed but its gap column is
//! left blank, so a plotting script cannot mistake it for a trusted
//! number. JSON keeps every field as produced, statuses included.

use crate::analysis::{CaseReport, RelaxationSummary};
use std::fmt::Write as _;

/// Output format selector for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format '{other}' (expected json or csv)")),
        }
    }
}

/// Renders a case report in the requested format.
pub fn render_report(report: &CaseReport, format: ReportFormat) -> Result<String, serde_json::Error> {
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            Ok(text)
        }
        ReportFormat::Csv => Ok(render_csv(report)),
    }
}

pub const CSV_HEADER: &str =
    "case,base_mva,kind,variant,value,gap_percent,status,iterations,runtime_s,ac_feasible,numeric_warning";

fn csv_relax_row(out: &mut String, case: &str, base: f64, row: &RelaxationSummary) {
    let gap = if row.status == "optimal" { format!("{:.4}", row.gap_percent) } else { String::new() };
    let feas = row.ac_feasible.map(|b| b.to_string()).unwrap_or_default();
    let _ = writeln!(
        out,
        "{case},{base},{kind},{variant},{value},{gap},{status},{iters},{runtime:.4},{feas},{warn}",
        kind = row.kind,
        variant = row.variant.as_deref().unwrap_or(""),
        value = row.bound,
        status = row.status,
        iters = row.iterations,
        runtime = row.runtime_s,
        warn = row.numeric_warning,
    );
}

fn render_csv(report: &CaseReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    let _ = writeln!(
        out,
        "{case},{base},ac,,{value},,{status},{iters},{runtime:.4},,{warn}",
        case = report.case,
        base = report.base_mva,
        value = report.ac.objective,
        status = report.ac.status,
        iters = report.ac.iterations,
        runtime = report.ac.runtime_s,
        warn = report.ac.status == "numeric-warning",
    );
    for row in &report.relaxations {
        csv_relax_row(&mut out, &report.case, report.base_mva, row);
    }
    if let Some(cp) = &report.copper_plate {
        csv_relax_row(&mut out, &report.case, report.base_mva, cp);
    }
    out
}
