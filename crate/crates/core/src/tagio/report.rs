//! Plain-text reports: `#` metadata lines followed by named CSV tables.
//!
//! ```text
//! # report analyze
//! # seed=1
//! [summary]
//! quantity,value,sigma
//! sbr_snspd,109.1,1.9
//! ```

use std::fmt::Write as _;

use thiserror::Error;

/// Metadata every report must carry.
pub const REQUIRED_METADATA: [&str; 3] = ["config_digest", "seed", "tool_version"];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn parse(s: &str) -> Self {
        if let Ok(v) = s.parse::<i64>() {
            Cell::Int(v)
        } else if let Ok(v) = s.parse::<f64>() {
            Cell::Num(v)
        } else {
            Cell::Text(s.to_string())
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
        i64::try_from(v).map_or(Cell::Num(v as f64), Cell::Int)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::from(v as u64)
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

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn column_index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    /// Cell in `column` of the first row whose first cell is the text `label`.
    pub fn lookup(&self, label: &str, column: &str) -> Option<&Cell> {
        let c = self.column_index(column)?;
        self.rows.iter().find(|r| r.first().and_then(Cell::as_text) == Some(label)).and_then(|r| r.get(c))
    }

    pub fn column_f64(&self, column: &str) -> Option<Vec<f64>> {
        let c = self.column_index(column)?;
        self.rows.iter().map(|r| r.get(c).and_then(Cell::as_f64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("table `{table}` row {row} column `{column}` is not finite")]
    NonFinite { table: String, row: usize, column: String },
    #[error("table `{table}` row {row} has {got} cells, expected {expected}")]
    Shape { table: String, row: usize, got: usize, expected: usize },
    #[error("report metadata `{0}` missing")]
    MissingMetadata(&'static str),
    #[error("report line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub kind: String,
    pub metadata: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into(), ..Self::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(kv) => kv.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
        self
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn add(&mut self, table: Table) -> &mut Self {
        self.tables.push(table);
        self
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Append the tables of `other`, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut t in other.tables {
            t.name = format!("{prefix}.{}", t.name);
            self.tables.push(t);
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        for key in REQUIRED_METADATA {
            if self.metadata_value(key).is_none() {
                return Err(ReportError::MissingMetadata(key));
            }
        }
        for t in &self.tables {
            for (i, row) in t.rows.iter().enumerate() {
                if row.len() != t.columns.len() {
                    return Err(ReportError::Shape {
                        table: t.name.clone(),
                        row: i,
                        got: row.len(),
                        expected: t.columns.len(),
                    });
                }
                for (j, cell) in row.iter().enumerate() {
                    if let Cell::Num(v) = cell {
                        if !v.is_finite() {
                            return Err(ReportError::NonFinite {
                                table: t.name.clone(),
                                row: i,
                                column: t.columns[j].clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Validated text form.
    pub fn render(&self) -> Result<String, ReportError> {
        self.validate()?;
        let clean = |s: &str| s.replace([',', '\n', '\r'], ";");
        let mut out = String::new();
        writeln!(out, "# report {}", self.kind).unwrap();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={}", clean(v)).unwrap();
        }
        for t in &self.tables {
            writeln!(out, "\n[{}]", t.name).unwrap();
            writeln!(out, "{}", t.columns.join(",")).unwrap();
            for row in &t.rows {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| match c {
                        Cell::Int(v) => v.to_string(),
                        Cell::Num(v) => format!("{v:e}"),
                        Cell::Text(s) => clean(s),
                    })
                    .collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut r = Report::default();
        let mut current: Option<Table> = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(m) = line.strip_prefix('#') {
                let m = m.trim();
                if let Some(kind) = m.strip_prefix("report ") {
                    r.kind = kind.to_string();
                } else if let Some((k, v)) = m.split_once('=') {
                    r.metadata.push((k.to_string(), v.to_string()));
                }
            } else if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                r.tables.extend(current.take());
                current = Some(Table { name: name.to_string(), columns: Vec::new(), rows: Vec::new() });
            } else {
                let t = current
                    .as_mut()
                    .ok_or(ReportError::Parse { line: i + 1, message: "row outside any table".into() })?;
                if t.columns.is_empty() {
                    t.columns = line.split(',').map(str::to_string).collect();
                } else {
                    t.rows.push(line.split(',').map(Cell::parse).collect());
                }
            }
        }
        r.tables.extend(current);
        Ok(r)
    }
}
