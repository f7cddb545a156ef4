//! Output tables: CSV with `#` metadata lines and a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if *v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) => format!("{v:e}"),
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Table plus summary of one command run.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Map<String, Value>,
    pub notes: Vec<String>,
    /// Resolution settings echoed in the metadata.
    pub grid: String,
    pub rng: Option<String>,
}

impl Report {
    fn metadata(&self, config: &RunConfig, wall_time: Option<f64>) -> Vec<(String, Value)> {
        let mut m = vec![
            ("tool".to_string(), json!(format!("sqkd {}", env!("CARGO_PKG_VERSION")))),
            ("command".to_string(), json!(self.command)),
            ("config".to_string(), config.to_json()),
            ("grid".to_string(), json!(self.grid)),
        ];
        if let Some(rng) = &self.rng {
            m.push(("rng".to_string(), json!(rng)));
        }
        if let Some(t) = wall_time {
            m.push(("wall_time_s".to_string(), json!(t)));
        }
        m
    }

    pub fn csv_string(&self, config: &RunConfig, wall_time: Option<f64>) -> Result<String, CliError> {
        let mut out = String::new();
        for (k, v) in self.metadata(config, wall_time) {
            let text = match v {
                Value::String(s) => s,
                other => other.to_string(),
            };
            out.push_str(&format!("# {k}: {text}\n"));
        }
        for note in &self.notes {
            out.push_str(&format!("# note: {note}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(io_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io_error)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))?);
        Ok(out)
    }

    pub fn json_value(&self, config: &RunConfig, wall_time: Option<f64>) -> Value {
        let mut root = Map::new();
        for (k, v) in self.metadata(config, wall_time) {
            root.insert(k, v);
        }
        root.insert("notes".into(), json!(self.notes));
        root.insert("summary".into(), Value::Object(self.summary.clone()));
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().zip(r).map(|(c, v)| (c.clone(), v.json())).collect()))
            .collect();
        root.insert("rows".into(), Value::Array(rows));
        Value::Object(root)
    }

    /// Writes `<dir>/<command>.csv` and `.json` as enabled; returns the paths.
    pub fn write(&self, config: &RunConfig, wall_time: Option<f64>) -> Result<Vec<PathBuf>, CliError> {
        let dir = &config.output.dir;
        ensure_dir(dir)?;
        let mut written = Vec::new();
        if config.output.csv {
            let path = dir.join(format!("{}.csv", self.command));
            fs::write(&path, self.csv_string(config, wall_time)?).map_err(|e| write_error(&path, e))?;
            written.push(path);
        }
        if config.output.json {
            let path = dir.join(format!("{}.json", self.command));
            let text = serde_json::to_string_pretty(&self.json_value(config, wall_time))
                .map_err(|e| CliError::Io(e.to_string()))?;
            fs::write(&path, text + "\n").map_err(|e| write_error(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", dir.display())))
}

fn io_error(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn write_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}
