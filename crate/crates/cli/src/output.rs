//! Tables, CSV/JSON emission and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::RunError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    /// Floats carry 17 significant digits so values round-trip exactly.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_nan() => "NaN".into(),
            Cell::Float(v) if v.is_infinite() => if *v > 0.0 { "inf".into() } else { "-inf".into() },
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(_) => Value::Null,
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
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

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let mut m = Map::new();
                    for (c, v) in self.columns.iter().zip(row) {
                        m.insert((*c).to_string(), v.to_json());
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }

    pub fn encode(&self, format: Format) -> Result<Vec<u8>, String> {
        match format {
            Format::Csv => self.to_csv().map_err(|e| e.to_string()),
            Format::Json => {
                let mut v = serde_json::to_vec_pretty(&json!({ "columns": self.columns, "rows": self.to_json() })).map_err(|e| e.to_string())?;
                v.push(b'\n');
                Ok(v)
            }
        }
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub primary: Table,
    /// Extra tables written next to the primary file, keyed by suffix.
    pub extra: Vec<(&'static str, Table)>,
    pub summary: Value,
    /// One flag per primary row (or per solve) so nothing is silently dropped.
    pub row_status: Vec<bool>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty() && self.row_status.iter().all(|&c| c)
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'static str,
    config: &'a RunConfig,
    versions: Value,
    outputs: Vec<String>,
    success: bool,
    row_status: &'a [bool],
    failures: &'a [String],
    summary: &'a Value,
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn sibling(primary: &Path, suffix: &str, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| RunError::Output { path: dir.to_path_buf(), message: e.to_string() })?;
    }
    fs::write(path, bytes).map_err(|e| RunError::Output { path: path.to_path_buf(), message: e.to_string() })
}

/// Write the primary table, any extra tables and the manifest. Returns every path written.
pub fn emit(cfg: &RunConfig, outcome: &Outcome) -> Result<Vec<PathBuf>, RunError> {
    let format = cfg.params.format();
    let primary = cfg.output_path();
    let encode = |t: &Table, p: &Path| t.encode(format).map_err(|message| RunError::Output { path: p.to_path_buf(), message });
    write(&primary, &encode(&outcome.primary, &primary)?)?;
    let mut paths = vec![primary.clone()];
    for (suffix, table) in &outcome.extra {
        let p = sibling(&primary, suffix, format);
        write(&p, &encode(table, &p)?)?;
        paths.push(p);
    }
    let manifest = Manifest {
        command: cfg.command.name(),
        config: cfg,
        versions: json!({ "qsl-cli": env!("CARGO_PKG_VERSION"), "qsl-core": qsl_core::VERSION }),
        outputs: paths.iter().map(|p| p.display().to_string()).collect(),
        success: outcome.success(),
        row_status: &outcome.row_status,
        failures: &outcome.failures,
        summary: &outcome.summary,
    };
    let mpath = manifest_path(&primary);
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| RunError::Output { path: mpath.clone(), message: e.to_string() })?;
    bytes.push(b'\n');
    write(&mpath, &bytes)?;
    paths.push(mpath);
    Ok(paths)
}
