//! Result tables and their CSV form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ScenarioSpec;
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
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
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:e}"),
            Cell::Text(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn index(&self, column: &str) -> usize {
        self.columns
            .iter()
            .position(|c| *c == column)
            .unwrap_or_else(|| panic!("no column `{column}`"))
    }

    /// Rows whose text column `key` equals `value`.
    pub fn filter(&self, key: &str, value: &str) -> Table {
        let i = self.index(key);
        Table {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| matches!(&r[i], Cell::Text(t) if t == value))
                .cloned()
                .collect(),
        }
    }

    pub fn f64s(&self, column: &str) -> Vec<f64> {
        let i = self.index(column);
        self.rows
            .iter()
            .map(|r| match &r[i] {
                Cell::Float(v) => *v,
                Cell::Int(v) => *v as f64,
                Cell::Bool(v) => f64::from(u8::from(*v)),
                Cell::Text(t) => t.parse().unwrap_or(f64::NAN),
            })
            .collect()
    }

    pub fn bools(&self, column: &str) -> Vec<bool> {
        let i = self.index(column);
        self.rows
            .iter()
            .map(|r| matches!(r[i], Cell::Bool(true)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn spec_hash(spec: &ScenarioSpec) -> String {
    hex::encode(Sha256::digest(spec.to_canonical_json().as_bytes()))
}

/// CSV text with a `#` comment header carrying the resolved spec and its hash.
pub fn render(command: &str, spec: &ScenarioSpec, table: &Table) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# cyclosync {} {}", command, env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# seed: {}", spec.seed);
    let _ = writeln!(s, "# spec_sha256: {}", spec_hash(spec));
    let _ = writeln!(s, "# spec: {}", spec.to_canonical_json());
    s.push_str(&table.to_csv());
    s
}

pub fn write(
    dir: &Path,
    command: &str,
    spec: &ScenarioSpec,
    table: &Table,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let name = spec
        .output
        .clone()
        .unwrap_or_else(|| format!("{command}.csv"));
    let path = dir.join(name);
    std::fs::write(&path, render(command, spec, table))?;
    Ok(path)
}
