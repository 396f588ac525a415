//! Minimal CSV writer with a fixed float format.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses
//! back to the identical `f64` and does not depend on the platform.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", path.display())]
pub struct WriteError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    /// Written as nothing between the separators.
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvReport {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    /// Emitted after the rows, each prefixed with `# `.
    trailer: Vec<String>,
}

impl CsvReport {
    pub fn new(header: &[&'static str]) -> Self {
        CsvReport {
            header: header.to_vec(),
            rows: Vec::new(),
            trailer: Vec::new(),
        }
    }

    pub fn header(&self) -> &[&'static str] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    /// Panics if the row width differs from the header; that is a bug in the
    /// caller, not a data problem.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.trailer.push(line.into());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Float(v) => out.push_str(&format_float(*v)),
                    Cell::Int(v) => {
                        let _ = write!(out, "{v}");
                    }
                    Cell::Text(s) => out.push_str(s),
                    Cell::Empty => {}
                }
            }
            out.push('\n');
        }
        for line in &self.trailer {
            for part in line.lines() {
                out.push_str("# ");
                out.push_str(part);
                out.push('\n');
            }
        }
        out
    }
}

pub fn write_csv(report: &CsvReport, path: &Path) -> Result<(), WriteError> {
    fs::write(path, report.render()).map_err(|source| WriteError {
        path: path.to_owned(),
        source,
    })
}
