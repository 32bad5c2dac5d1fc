// Copyright 2026 The fdp-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! CSV and JSON result tables.
//!
//! CSV files start with `# key: value` metadata lines, followed by a header
//! row and one line per row; floats carry 17 significant digits. JSON files
//! hold `{"metadata": {...}, "rows": [{column: value, ...}, ...]}`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Bool(b) => b.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Int(i) => Value::from(*i),
            // non-finite floats have no JSON form
            Cell::Float(x) if !x.is_finite() => Value::String(x.to_string()),
            Cell::Float(x) => Value::from(*x),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }

    fn from_json(value: &Value) -> Option<Cell> {
        Some(match value {
            Value::Bool(b) => Cell::Bool(*b),
            Value::Number(n) if n.is_i64() => Cell::Int(n.as_i64()?),
            Value::Number(n) => Cell::Float(n.as_f64()?),
            Value::String(s) => Cell::Text(s.clone()),
            _ => return None,
        })
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// Rows with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the header");
        self.rows.push(row);
    }

    /// Values of the `pass` column, if there is one.
    pub fn pass_flags(&self) -> Vec<bool> {
        let Some(idx) = self.columns.iter().position(|c| c == "pass") else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| matches!(r[idx], Cell::Bool(true)))
            .collect()
    }

    /// Rows as JSON objects keyed by column.
    pub fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    /// Inverse of [`Table::json_rows`] for a known column order.
    pub fn from_json_rows(columns: &[String], rows: &Value) -> Option<Table> {
        let rows = rows
            .as_array()?
            .iter()
            .map(|obj| {
                let obj = obj.as_object()?;
                if obj.len() != columns.len() {
                    return None;
                }
                columns.iter().map(|c| obj.get(c).and_then(Cell::from_json)).collect()
            })
            .collect::<Option<Vec<Vec<Cell>>>>()?;
        Some(Table {
            columns: columns.to_vec(),
            rows,
        })
    }
}

/// Metadata written with every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub seed: u64,
    pub replicates: u64,
    pub version: String,
    pub config: Value,
}

/// Renders the table in the requested format.
pub fn render_table(table: &Table, meta: &Metadata, format: Format) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::Csv => {
            writeln!(out, "# command: {}", meta.command)?;
            writeln!(out, "# seed: {}", meta.seed)?;
            writeln!(out, "# replicates: {}", meta.replicates)?;
            writeln!(out, "# version: {}", meta.version)?;
            writeln!(out, "# config: {}", meta.config)?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::csv))?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("metadata".into(), serde_json::to_value(meta).map_err(std::io::Error::other)?);
            doc.insert("rows".into(), table.json_rows());
            serde_json::to_writer_pretty(&mut out, &Value::Object(doc)).map_err(std::io::Error::other)?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

/// Writes the table to `path`.
pub fn emit_table(table: &Table, meta: &Metadata, format: Format, path: &Path) -> std::io::Result<()> {
    let bytes = render_table(table, meta, format)?;
    let mut file = BufWriter::new(File::create(path)?);
    file.write_all(&bytes)?;
    file.flush()
}

/// Reads back a CSV table written by [`emit_table`]; numbers that parse as
/// integers become `Int`, others `Float`.
pub fn read_csv_table(text: &str) -> csv::Result<Table> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(
            record
                .iter()
                .map(|field| {
                    if let Ok(b) = field.parse::<bool>() {
                        Cell::Bool(b)
                    } else if let Ok(i) = field.parse::<i64>() {
                        Cell::Int(i)
                    } else if let Ok(x) = field.parse::<f64>() {
                        Cell::Float(x)
                    } else {
                        Cell::Text(field.to_string())
                    }
                })
                .collect(),
        );
    }
    Ok(Table { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Metadata {
        Metadata {
            command: "consistency-sweep".into(),
            seed: 3,
            replicates: 100,
            version: "0.1.0".into(),
            config: serde_json::json!({"seed": 3}),
        }
    }

    fn sample_table() -> Table {
        let mut t = Table::new(&["m", "x", "label", "pass"]);
        t.push(vec![10usize.into(), (1.0f64 / 3.0).into(), "du".into(), true.into()]);
        t.push(vec![20usize.into(), 1e-300.into(), "a,b".into(), false.into()]);
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = sample_table();
        let text = String::from_utf8(render_table(&t, &meta(), Format::Csv).unwrap()).unwrap();
        assert!(text.starts_with("# command: consistency-sweep\n# seed: 3\n"));
        assert!(text.contains("3.3333333333333331e-1"));
        assert_eq!(read_csv_table(&text).unwrap(), t);
    }

    #[test]
    fn header_only_csv() {
        let t = Table::new(&["m", "pass"]);
        let text = String::from_utf8(render_table(&t, &meta(), Format::Csv).unwrap()).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["m,pass"]);
    }

    #[test]
    fn json_round_trip() {
        let t = sample_table();
        let bytes = render_table(&t, &meta(), Format::Json).unwrap();
        let doc: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(doc["metadata"]["seed"], 3);
        assert_eq!(Table::from_json_rows(&t.columns, &doc["rows"]).unwrap(), t);
        assert_eq!(t.pass_flags(), vec![true, false]);
    }
}
