use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;

/// One table cell. Reals are written with 17 significant digits in CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Bool(bool),
    Missing,
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Missing, Into::into)
    }
}

impl Cell {
    fn csv(&self, out: &mut String) {
        match self {
            Cell::Int(x) => write!(out, "{x}").unwrap(),
            Cell::Real(x) if x.is_finite() => write!(out, "{x:.16e}").unwrap(),
            Cell::Real(x) => write!(out, "{x}").unwrap(),
            Cell::Bool(b) => write!(out, "{b}").unwrap(),
            Cell::Missing => {}
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(x) => Value::from(*x),
            // Non-finite reals have no JSON number form.
            Cell::Real(x) if x.is_finite() => Value::from(*x),
            Cell::Real(x) => Value::from(x.to_string()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Missing => Value::Null,
        }
    }
}

/// Command results: a fixed header and rows of matching width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.csv(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub results: Table,
    /// Wall-clock seconds per grid cell, in grid order.
    pub timings: Vec<f64>,
}

impl RunReport {
    fn header(&self) -> Map<String, Value> {
        let mut obj = Map::new();
        obj.insert("toolkit_version".into(), env!("CARGO_PKG_VERSION").into());
        obj.insert("command".into(), self.config.command.name().into());
        obj.insert("seed".into(), self.config.seed.into());
        obj.insert(
            "config".into(),
            serde_json::to_value(&self.config).expect("config is serializable"),
        );
        obj
    }

    fn timings_json(&self) -> Value {
        Value::Array(self.timings.iter().map(|&t| Value::from(t)).collect())
    }

    /// The full JSON report.
    pub fn to_json(&self) -> String {
        let mut obj = self.header();
        obj.insert("results".into(), self.results.to_json());
        obj.insert("timings".into(), self.timings_json());
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("report is serializable");
        s.push('\n');
        s
    }

    /// Metadata written next to a CSV report.
    pub fn metadata_json(&self) -> String {
        let mut obj = self.header();
        obj.insert("timings".into(), self.timings_json());
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("report is serializable");
        s.push('\n');
        s
    }

    /// The reproducible part of the report: identical for identical configs.
    pub fn results_section(&self) -> String {
        match self.config.format {
            Format::Csv => self.results.to_csv(),
            Format::Json => serde_json::to_string_pretty(&self.results.to_json()).expect("results are serializable"),
        }
    }

    /// Writes the report to the configured destination. A CSV written to a
    /// file gets a `<file>.meta.json` sidecar.
    pub fn write(&self) -> Result<(), CliError> {
        let body = match self.config.format {
            Format::Csv => self.results.to_csv(),
            Format::Json => self.to_json(),
        };
        match self.config.output_path() {
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(body.as_bytes())?;
                stdout.flush()?;
            }
            Some(path) => {
                write_atomic(&path, body.as_bytes())?;
                if self.config.format == Format::Csv {
                    let mut meta = path.into_os_string();
                    meta.push(".meta.json");
                    write_atomic(Path::new(&meta), self.metadata_json().as_bytes())?;
                }
            }
        }
        Ok(())
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place,
/// so readers never observe a partial report.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}
