//! Check records, CSV tables and the JSON-lines ledger.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Direction of the inequality a check asserts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

/// A single verified quantity, before run metadata is attached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub inputs: Value,
    pub value: f64,
    pub tolerance: f64,
    /// Distance to the tolerance; negative exactly when the check fails.
    pub slack: f64,
    pub sigma: Option<f64>,
    pub pass: bool,
    /// Hard checks are exact statements; soft ones are statistical or
    /// finite-size diagnostics and never change the exit status.
    pub hard: bool,
}

impl Check {
    pub fn new(
        check: &str,
        inputs: Value,
        value: f64,
        bound: Bound,
        sigma: Option<f64>,
        hard: bool,
    ) -> Self {
        let (tolerance, slack) = match bound {
            Bound::AtMost(t) => (t, t - value),
            Bound::AtLeast(t) => (t, value - t),
        };
        let pass = slack >= 0.0;
        Check {
            check: check.into(),
            inputs,
            value,
            tolerance,
            slack,
            sigma,
            pass,
            hard,
        }
    }
}

/// A ledger line: the check plus run provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub suite: String,
    #[serde(flatten)]
    pub check: Check,
    pub seed: u64,
    pub config_hash: String,
    pub content_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Float(f64),
    Int(i64),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Floats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Float(v) => format_float(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_path(&path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes all records to `ledger.jsonl` in one pass.
pub fn write_ledger(dir: &Path, records: &[CheckRecord]) -> Result<PathBuf, CliError> {
    let path = dir.join("ledger.jsonl");
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    f.write_all(&buf).map_err(|e| io_err(&path, e))?;
    Ok(path)
}
