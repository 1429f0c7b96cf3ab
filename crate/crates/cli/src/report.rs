//! Report envelope and row types, with JSON and CSV writers.
//!
//! Output is deterministic for a fixed config and seed: floats are printed
//! with 15 significant digits in CSV, JSON uses the shortest round-trip
//! form, and row order follows the input sweep.

use serde::Serialize;
use std::io::Write;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format '{other}' (expected json or csv)")),
        }
    }
}

/// One verification line; any `FAIL` drives the process exit code to 1.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub config: C,
    pub rows: Vec<R>,
    pub checks: Vec<Check>,
}

/// A row that knows its CSV representation; the column order is fixed and
/// documented in the README.
pub trait CsvRow {
    fn csv_header() -> &'static [&'static str];
    fn csv_fields(&self) -> Vec<String>;
}

/// 15 significant digits, stable across runs.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.14e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

pub fn write_report<C, R, W>(
    out: &mut W,
    format: OutputFormat,
    report: &Report<C, R>,
) -> std::io::Result<()>
where
    C: Serialize,
    R: Serialize + CsvRow,
    W: Write,
{
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            out.write_all(b"\n")
        }
        OutputFormat::Csv => {
            writeln!(out, "{}", R::csv_header().join(","))?;
            for row in &report.rows {
                writeln!(out, "{}", row.csv_fields().join(","))?;
            }
            for check in &report.checks {
                writeln!(
                    out,
                    "# {} {}: {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                )?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_has_fifteen_digits() {
        assert_eq!(fmt_f(2.96), "2.96000000000000e0");
        assert_eq!(fmt_f(0.0), "0.00000000000000e0");
        assert_eq!(fmt_opt(None), "");
    }
}
