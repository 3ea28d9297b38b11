//! Canonical columnar event logs.
//!
//! An [`EventLog`] is an immutable table of events with three designated
//! role columns (case id, activity, timestamp). Logs come from XES or CSV
//! input, are profiled into a [`LogAbstraction`] that is safe to hand to a
//! language model, and are narrowed by the filter operations.

mod abstraction;
mod csv_io;
mod filter;
pub mod predicate;
mod roles;
mod value;
mod xes;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use abstraction::{extract_abstraction, AbstractionOptions, ColumnProfile, LogAbstraction};
pub use csv_io::{parse_csv, write_csv, CsvOptions, RoleHints};
pub use filter::{filter_attribute, filter_query, filter_time_range};
pub use roles::{infer_roles, RoleMap};
pub use value::{
    infer_type, parse_cell, parse_timestamp, render_timestamp, ColumnType, Timestamp, Value,
};
pub use xes::parse_xes;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    MalformedDocument {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing mandatory attribute `{key}` ({context})")]
    MissingMandatoryAttribute { key: String, context: String },
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("unparseable timestamp in column `{column}` at row {row}")]
    UnparseableTimestamp { column: String, row: usize },
    #[error("cannot resolve the {role} role; candidates: [{}]", candidates.join(", "))]
    AmbiguousRole {
        role: &'static str,
        candidates: Vec<String>,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid time range: start {start} is after end {end}")]
    InvalidRange { start: String, end: String },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("invalid log: {0}")]
    Invalid(String),
}

pub type Result<T, E = LogError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

/// One process instance: its id and the row indices of its events in
/// timestamp order (ties by original row order).
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub id: String,
    pub events: Vec<usize>,
}

/// Immutable event table. Rows are kept in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    columns: Vec<Column>,
    rows: Vec<Vec<Value>>,
    roles: RoleMap,
    role_index: RoleIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RoleIndex {
    case_id: usize,
    activity: usize,
    timestamp: usize,
}

impl EventLog {
    /// Validates the invariants: rectangular rows, typed cells, existing role
    /// columns, a timestamp-typed timestamp role, and non-null role cells.
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<Value>>, roles: RoleMap) -> Result<Self> {
        let find = |name: &str| {
            columns
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| LogError::UnknownColumn(name.to_string()))
        };
        let role_index = RoleIndex {
            case_id: find(&roles.case_id)?,
            activity: find(&roles.activity)?,
            timestamp: find(&roles.timestamp)?,
        };
        if let Some(resource) = &roles.resource {
            find(resource)?;
        }
        if columns[role_index.timestamp].ty != ColumnType::Timestamp {
            return Err(LogError::TypeMismatch(format!(
                "timestamp role column `{}` has type {}",
                roles.timestamp, columns[role_index.timestamp].ty
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(LogError::Invalid(format!("duplicate column `{}`", c.name)));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(LogError::RaggedRow {
                    row: i,
                    found: row.len(),
                    expected: columns.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                if let Some(ty) = cell.column_type() {
                    if ty != col.ty {
                        return Err(LogError::TypeMismatch(format!(
                            "row {i}: cell of type {ty} in {} column `{}`",
                            col.ty, col.name
                        )));
                    }
                }
            }
            for (role, idx) in [
                ("case id", role_index.case_id),
                ("activity", role_index.activity),
                ("timestamp", role_index.timestamp),
            ] {
                if row[idx].is_null() {
                    return Err(LogError::MissingMandatoryAttribute {
                        key: columns[idx].name.clone(),
                        context: format!("{role} of row {i}"),
                    });
                }
            }
        }
        Ok(EventLog {
            columns,
            rows,
            roles,
            role_index,
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn roles(&self) -> &RoleMap {
        &self.roles
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn event_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn case_id(&self, row: usize) -> String {
        self.rows[row][self.role_index.case_id].render()
    }

    pub fn activity(&self, row: usize) -> String {
        self.rows[row][self.role_index.activity].render()
    }

    pub fn timestamp(&self, row: usize) -> Timestamp {
        self.rows[row][self.role_index.timestamp]
            .as_time()
            .expect("timestamp role cells are non-null timestamps")
    }

    /// Cases in order of first appearance.
    pub fn cases(&self) -> Vec<Case> {
        let mut order: Vec<Case> = Vec::new();
        let mut by_id: HashMap<String, usize> = HashMap::new();
        for row in 0..self.rows.len() {
            let id = self.case_id(row);
            let slot = *by_id.entry(id.clone()).or_insert_with(|| {
                order.push(Case {
                    id,
                    events: Vec::new(),
                });
                order.len() - 1
            });
            order[slot].events.push(row);
        }
        for case in &mut order {
            // stable: ties keep row order
            case.events.sort_by_key(|&r| self.timestamp(r));
        }
        order
    }

    pub fn case_count(&self) -> usize {
        self.cases().len()
    }

    /// Activity sequence of every case, in case order.
    pub fn traces(&self) -> Vec<Trace> {
        self.cases()
            .into_iter()
            .map(|case| Trace {
                activities: case.events.iter().map(|&r| self.activity(r)).collect(),
                start: case.events.first().map(|&r| self.timestamp(r)),
                end: case.events.last().map(|&r| self.timestamp(r)),
                case_id: case.id,
            })
            .collect()
    }

    pub fn time_span(&self) -> Option<(Timestamp, Timestamp)> {
        let ts = self.rows.iter().filter_map(|r| r[self.role_index.timestamp].as_time());
        let (min, max) = ts.fold((None, None), |(lo, hi): (Option<Timestamp>, Option<Timestamp>), t| {
            (Some(lo.map_or(t, |l| l.min(t))), Some(hi.map_or(t, |h| h.max(t))))
        });
        min.zip(max)
    }

    /// Same schema and roles, a subset of the rows (kept in input order).
    pub(crate) fn with_rows(&self, keep: impl Fn(usize) -> bool) -> EventLog {
        let rows = (0..self.rows.len())
            .filter(|&i| keep(i))
            .map(|i| self.rows[i].clone())
            .collect();
        EventLog {
            columns: self.columns.clone(),
            rows,
            roles: self.roles.clone(),
            role_index: self.role_index,
        }
    }
}

/// A case reduced to its activity sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub case_id: String,
    pub activities: Vec<String>,
    pub start: Option<Timestamp>,
    pub end: Option<Timestamp>,
}

impl Trace {
    pub fn duration_seconds(&self) -> f64 {
        match (self.start, self.end) {
            (Some(s), Some(e)) => (e - s).num_milliseconds() as f64 / 1000.0,
            _ => 0.0,
        }
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn cases_sort_by_timestamp_with_stable_ties() {
        let log = simple_log(&[("1", "b", 5), ("1", "a", 0), ("1", "c", 5), ("2", "x", 1)]);
        let traces = log.traces();
        assert_eq!(traces[0].activities, ["a", "b", "c"]);
        assert_eq!(traces[1].activities, ["x"]);
        assert_eq!(log.case_count(), 2);
    }

    #[test]
    fn rejects_null_role_cells_and_ragged_rows() {
        let columns = vec![
            Column::new("case", ColumnType::String),
            Column::new("activity", ColumnType::String),
            Column::new("time", ColumnType::Timestamp),
        ];
        let roles = RoleMap::new("case", "activity", "time");
        let err = EventLog::new(
            columns.clone(),
            vec![vec![Value::from("1"), Value::Null, Value::Time(t(0))]],
            roles.clone(),
        )
        .unwrap_err();
        assert!(matches!(err, LogError::MissingMandatoryAttribute { .. }));
        let err = EventLog::new(columns, vec![vec![Value::from("1")]], roles).unwrap_err();
        assert!(matches!(err, LogError::RaggedRow { row: 0, .. }));
    }
}
