//! Small typed result tables produced by summaries and conformance checks.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::event_log::{parse_cell, Column, ColumnType, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Deserialize)]
struct RawTable {
    columns: Vec<Column>,
    rows: Vec<Vec<serde_json::Value>>,
}

impl TryFrom<RawTable> for Table {
    type Error = String;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        let rows = raw
            .rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != raw.columns.len() {
                    return Err(format!("row {i} has {} cells, expected {}", row.len(), raw.columns.len()));
                }
                row.into_iter()
                    .zip(&raw.columns)
                    .map(|(cell, col)| json_cell(cell, col.ty).ok_or_else(|| {
                        format!("row {i}: bad {} cell for column `{}`", col.ty, col.name)
                    }))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        Ok(Table {
            columns: raw.columns,
            rows,
        })
    }
}

fn json_cell(cell: serde_json::Value, ty: ColumnType) -> Option<Value> {
    use serde_json::Value as J;
    Some(match (cell, ty) {
        (J::Null, _) => Value::Null,
        (J::Bool(b), ColumnType::Boolean) => Value::Bool(b),
        (J::Number(n), ColumnType::Integer) => Value::Int(n.as_i64()?),
        (J::Number(n), ColumnType::Real) => Value::Real(n.as_f64()?),
        (J::String(s), ColumnType::String) => Value::Str(s),
        (J::String(s), _) if !s.is_empty() => parse_cell(&s, ty)?,
        _ => return None,
    })
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn with_columns(spec: &[(&str, ColumnType)]) -> Self {
        Table::new(spec.iter().map(|(n, t)| Column::new(*n, *t)).collect())
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_values(&self, name: &str) -> Option<impl Iterator<Item = &Value>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(move |r| &r[j]))
    }

    /// RFC-4180 CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::render))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn to_markdown(&self) -> String {
        let esc = |s: String| s.replace('|', "\\|").replace('\n', " ");
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| esc(c.name.clone())).collect();
        let _ = writeln!(out, "| {} |", header.join(" | "));
        let _ = writeln!(out, "|{}", " --- |".repeat(self.columns.len()));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| esc(v.render())).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }
}
