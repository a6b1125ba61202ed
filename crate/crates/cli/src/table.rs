//! Rectangular numeric tables written as commented CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written at the top of every emitted file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self, meta: &Meta) -> String {
        let mut s = String::new();
        writeln!(s, "# transitory {VERSION}").unwrap();
        writeln!(s, "# command: {}", meta.command).unwrap();
        writeln!(s, "# seed: {}", meta.seed).unwrap();
        writeln!(s, "# config_hash: {}", meta.config_hash).unwrap();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&fmt_float(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path, name: &str, meta: &Meta) -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, self.to_csv(meta)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

/// 17 significant digits, so the text round-trips to the same f64.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Parses what [`Table::to_csv`] wrote (comment lines skipped).
pub fn parse_csv(text: &str) -> Option<Table> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let columns: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        let row: Option<Vec<f64>> = line.split(',').map(|x| x.parse().ok()).collect();
        let row = row?;
        if row.len() != columns.len() {
            return None;
        }
        rows.push(row);
    }
    Some(Table { columns, rows })
}
