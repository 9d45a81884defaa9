//! Result tables and the per-run summary.
//!
//! Every numeric claim `x` in a table is followed by a method column: either
//! `x_lower, x_upper, x_method` for an interval or `x, x_method` for a single
//! value. Inputs (instance, p, depth, level, m, …) are not claims and carry
//! no tag.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use narrowops::{Method, NormEstimate};
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::verify::Check;
use crate::CliError;

pub const RUN_FORMAT: &str = "narrowops-run";
pub const RUN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    /// Whitespace-separated columns with a commented header; text fields
    /// that would break the column layout are quoted.
    pub fn to_gnuplot(&self) -> Vec<u8> {
        let quote = |s: &str| {
            if s.is_empty() {
                "\"\"".to_string()
            } else if s.contains(char::is_whitespace) {
                format!("\"{s}\"")
            } else {
                s.to_string()
            }
        };
        let mut out = format!("# {}\n", self.header.join(" "));
        for r in &self.rows {
            let fields: Vec<String> = r.iter().map(|s| quote(s)).collect();
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn to_json(&self) -> Vec<u8> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| (h.clone(), serde_json::Value::String(v.clone())))
                    .collect()
            })
            .collect();
        serde_json::to_vec_pretty(&rows).expect("table serializes")
    }

    /// Writes the table in `format` (plus a `.dat` file when `gnuplot`),
    /// returning the file names.
    pub fn write(&self, dir: &Path, format: Format, gnuplot: bool) -> Result<Vec<String>, CliError> {
        let mut names = Vec::new();
        let (ext, bytes) = match format {
            Format::Csv => ("csv", self.to_csv()),
            Format::Json => ("json", self.to_json()),
        };
        names.push(write_file(dir, &format!("{}.{ext}", self.name), &bytes)?);
        if gnuplot {
            names.push(write_file(dir, &format!("{}.dat", self.name), &self.to_gnuplot())?);
        }
        Ok(names)
    }
}

pub(crate) fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<String, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(name.to_string())
}

/// Shortest round-trip form; `inf`, `-inf`, `NaN` otherwise.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        x.to_string()
    }
}

pub fn est(e: &NormEstimate<f64>) -> [String; 3] {
    [num(e.lower), num(e.upper), e.method.to_string()]
}

pub fn tagged(x: f64, method: Method) -> [String; 2] {
    [num(x), method.to_string()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    ToleranceUnachievable,
    ClaimRejected,
}

/// A mathematical failure of one instance, kept in the run instead of
/// aborting it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub instance: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

impl Diagnostic {
    /// `None` for errors that are not per-instance mathematical failures.
    pub fn from_error(instance: impl Into<String>, e: &narrowops::Error) -> Option<Self> {
        let instance = instance.into();
        match e {
            narrowops::Error::ToleranceUnachievable { node, achieved, required } => Some(Diagnostic {
                kind: DiagnosticKind::ToleranceUnachievable,
                instance,
                message: e.to_string(),
                node: Some(node.to_string()),
                achieved: Some(*achieved),
                required: Some(*required),
                witness: None,
            }),
            narrowops::Error::ClaimRejected { witness, .. } => Some(Diagnostic {
                kind: DiagnosticKind::ClaimRejected,
                instance,
                message: e.to_string(),
                node: None,
                achieved: None,
                required: None,
                witness: Some(witness.clone()),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Infeasible,
}

/// Deterministic description of a run: no timestamps, so two runs of the
/// same manifest write the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub version: u32,
    pub artifact_version: String,
    pub subcommand: String,
    pub manifest_hash: String,
    pub manifest: Manifest,
    pub status: Status,
    pub tables: Vec<String>,
    pub certificates: Vec<CertificateSummary>,
    pub diagnostics: Vec<Diagnostic>,
    pub checks: Vec<Check>,
}

/// One line of the append-only run log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub subcommand: String,
    pub manifest_hash: String,
    pub manifest: Manifest,
    pub run_dir: Option<PathBuf>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub status: String,
    pub tables: Vec<String>,
    pub certificates: Vec<CertificateSummary>,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn append_record(log: &Path, record: &RunRecord) -> Result<(), CliError> {
    let mut line = serde_json::to_string(record).expect("record serializes");
    line.push('\n');
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(log)
        .map_err(|e| CliError::io(log, e))?;
    f.write_all(line.as_bytes()).map_err(|e| CliError::io(log, e))
}

pub fn unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0, 1e-300, 35.666666666666664, -2.5] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_and_gnuplot_layout() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["1.0".into(), "x y".into()]);
        assert_eq!(String::from_utf8(t.to_csv()).unwrap(), "a,b\n1.0,x y\n");
        assert_eq!(String::from_utf8(t.to_gnuplot()).unwrap(), "# a b\n1.0 \"x y\"\n");
        assert_eq!(t.column("b").unwrap(), vec!["x y"]);
    }
}
