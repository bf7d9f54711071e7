//! Versioned CSV tables with an optional JSON-lines mirror.
//!
//! The first header field is the schema string, and that column holds the
//! row index after sorting. Floats use Rust's shortest round-trip form,
//! switching to exponent notation for very large or small magnitudes, so
//! output is byte-stable.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn csv(&self, out: &mut String) {
        match self {
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            Cell::Float(v) => write!(out, "{v:?}").unwrap(),
            Cell::Bool(v) => write!(out, "{v}").unwrap(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                write!(out, "\"{}\"", s.replace('"', "\"\"")).unwrap()
            }
            Cell::Text(s) => out.push_str(s),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => Number::from_f64(*v).map_or_else(|| Value::String(v.to_string()), Value::Number),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
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
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone)]
struct Row {
    key: Vec<f64>,
    cells: Vec<Cell>,
}

#[derive(Debug, Clone)]
pub struct Table {
    schema: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Row>,
}

impl Table {
    pub fn new(schema: &'static str, columns: &[&'static str]) -> Self {
        Self {
            schema,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn schema(&self) -> &'static str {
        self.schema
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Adds a row sorted by `key`, compared lexicographically.
    pub fn push(&mut self, key: Vec<f64>, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns.len(), "row width for {}", self.schema);
        self.rows.push(Row { key, cells });
    }

    fn sorted(&self) -> Vec<&Row> {
        let mut rows: Vec<&Row> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.key
                .iter()
                .zip(&b.key)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or_else(|| a.key.len().cmp(&b.key.len()))
        });
        rows
    }

    /// Rows shown as CSV text, after sorting.
    pub fn to_csv(&self, timestamp: bool) -> String {
        let mut out = String::new();
        if timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            writeln!(out, "# generated_unix={secs}").unwrap();
        }
        out.push_str(self.schema);
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, row) in self.sorted().into_iter().enumerate() {
            write!(out, "{i}").unwrap();
            for cell in &row.cells {
                out.push(',');
                cell.csv(&mut out);
            }
            out.push('\n');
        }
        out
    }

    /// One JSON object per row, carrying the schema and row index.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.sorted().into_iter().enumerate() {
            let mut obj = Map::new();
            obj.insert("schema".into(), Value::String(self.schema.into()));
            obj.insert("row".into(), Value::from(i));
            for (name, cell) in self.columns.iter().zip(&row.cells) {
                obj.insert((*name).into(), cell.json());
            }
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }
}

/// Writes `text` to `path`, or to stdout when there is no path.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}
