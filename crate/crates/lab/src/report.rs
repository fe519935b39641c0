//! Report records and their JSON and CSV emitters.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nck_core::report::NamedMatrix;
use nck_core::CMat;
use serde::{Deserialize, Serialize};

use crate::config::{Command, ExperimentConfig, Format};
use crate::error::LabError;
use crate::real::Real;

pub const SCHEMA_VERSION: u32 = 1;
pub const LIBRARY_VERSION: &str = concat!("nck-lab ", env!("CARGO_PKG_VERSION"));

/// CSV header, one column per scan field.
pub const CSV_COLUMNS: [&str; 12] =
    ["cell_id", "p", "q", "s", "theta", "R", "dim", "n_terms", "constant", "std_error", "seed", "runtime_ms"];

/// A matrix as row-major `(re, im)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[Real; 2]>,
}

impl MatrixRecord {
    pub fn new(name: impl Into<String>, m: &CMat) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push([Real(m[(i, j)].re), Real(m[(i, j)].im)]);
            }
        }
        Self { name: name.into(), rows: m.nrows(), cols: m.ncols(), entries }
    }

    pub fn from_named(named: &NamedMatrix) -> Self {
        Self::new(named.name.clone(), &named.matrix)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub p: Option<Real>,
    pub q: Option<Real>,
    pub s: Option<Real>,
    pub theta: Option<Real>,
    #[serde(rename = "R")]
    pub r: Option<Real>,
    pub dim: usize,
    pub n_terms: usize,
    pub constant: Real,
    pub std_error: Real,
    pub seed: u64,
    pub runtime_ms: Real,
    /// Further per-cell numbers, by name.
    pub extra: BTreeMap<String, Real>,
    pub witness: Vec<MatrixRecord>,
}

impl Cell {
    pub fn new(id: impl Into<String>, seed: u64) -> Self {
        Self { id: id.into(), seed, ..Self::default() }
    }

    pub fn extra(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), Real(value));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub cell: String,
    pub message: String,
    pub fatal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub library_version: String,
    pub command: Command,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub violations: Vec<Violation>,
    pub fatal: bool,
}

impl Report {
    pub fn new(command: Command, config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            library_version: LIBRARY_VERSION.to_string(),
            command,
            seed: config.seed,
            config: config.clone(),
            cells: Vec::new(),
            violations: Vec::new(),
            fatal: false,
        }
    }

    pub fn violation(&mut self, cell: &str, message: impl Into<String>, fatal: bool) {
        self.fatal |= fatal;
        self.violations.push(Violation { cell: cell.to_string(), message: message.into(), fatal });
    }

    /// The report with timings and run-specific settings cleared, for
    /// comparing numerics across runs.
    pub fn numerics(&self) -> Report {
        let mut r = self.clone();
        for cell in &mut r.cells {
            cell.runtime_ms = Real(0.0);
        }
        r.config.threads = None;
        r.config.out = None;
        r.config.format = Format::Json;
        r
    }

    pub fn to_json(&self) -> Result<String, LabError> {
        serde_json::to_string_pretty(self).map_err(|e| LabError::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Report, LabError> {
        serde_json::from_str(text).map_err(|e| LabError::Serialize(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String, LabError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| LabError::Serialize(e.to_string());
        writer.write_record(CSV_COLUMNS).map_err(ser)?;
        let opt = |v: Option<Real>| v.map_or_else(String::new, Real::to_fixed_digits);
        for cell in &self.cells {
            writer
                .write_record([
                    cell.id.clone(),
                    opt(cell.p),
                    opt(cell.q),
                    opt(cell.s),
                    opt(cell.theta),
                    opt(cell.r),
                    cell.dim.to_string(),
                    cell.n_terms.to_string(),
                    cell.constant.to_fixed_digits(),
                    cell.std_error.to_fixed_digits(),
                    cell.seed.to_string(),
                    cell.runtime_ms.to_fixed_digits(),
                ])
                .map_err(ser)?;
        }
        let bytes = writer.into_inner().map_err(|e| LabError::Serialize(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| LabError::Serialize(e.to_string()))
    }

    pub fn render(&self, format: Format) -> Result<String, LabError> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    /// Writes the report to `path`, or to standard output when `None`.
    pub fn emit(&self, format: Format, path: Option<&Path>) -> Result<(), LabError> {
        let text = self.render(format)?;
        match path {
            Some(path) => std::fs::write(path, text).map_err(|source| LabError::Io { path: path.to_path_buf(), source }),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.write_all(b"\n"))
                    .map_err(|source| LabError::Io { path: "<stdout>".into(), source })
            }
        }
    }
}
