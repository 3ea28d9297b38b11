use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::event_log::{ColumnType, EventLog, Trace, Value};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub sequence: Vec<String>,
    pub frequency: usize,
    pub mean_duration: f64,
    pub min_duration: f64,
    pub max_duration: f64,
}

/// All variants, by frequency descending then lexicographic sequence.
pub fn variants(log: &EventLog) -> Vec<Variant> {
    variants_of(&log.traces())
}

pub(crate) fn variants_of(traces: &[Trace]) -> Vec<Variant> {
    let mut groups: HashMap<&[String], Vec<f64>> = HashMap::new();
    for t in traces {
        groups.entry(&t.activities).or_default().push(t.duration_seconds());
    }
    let mut out: Vec<Variant> = groups
        .into_iter()
        .map(|(seq, durations)| Variant {
            sequence: seq.to_vec(),
            frequency: durations.len(),
            mean_duration: durations.iter().sum::<f64>() / durations.len() as f64,
            min_duration: durations.iter().copied().fold(f64::INFINITY, f64::min),
            max_duration: durations.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    out.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.sequence.cmp(&b.sequence)));
    out
}

pub const DEFAULT_TOP_VARIANTS: usize = 20;

pub fn variant_summary(log: &EventLog, top_n: usize) -> Table {
    let mut table = Table::with_columns(&[
        ("variant", ColumnType::String),
        ("length", ColumnType::Integer),
        ("frequency", ColumnType::Integer),
        ("mean_duration_s", ColumnType::Real),
        ("min_duration_s", ColumnType::Real),
        ("max_duration_s", ColumnType::Real),
    ]);
    for v in variants(log).into_iter().take(top_n) {
        table.push(vec![
            Value::Str(v.sequence.join(",")),
            Value::Int(v.sequence.len() as i64),
            Value::Int(v.frequency as i64),
            Value::Real(v.mean_duration),
            Value::Real(v.min_duration),
            Value::Real(v.max_duration),
        ]);
    }
    table
}

/// One row per case; `variant_index` points into [`variants`] order.
pub fn case_summary(log: &EventLog) -> Table {
    let traces = log.traces();
    let index: HashMap<Vec<String>, usize> = variants_of(&traces)
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v.sequence, i))
        .collect();
    let mut table = Table::with_columns(&[
        ("case_id", ColumnType::String),
        ("event_count", ColumnType::Integer),
        ("start_time", ColumnType::Timestamp),
        ("end_time", ColumnType::Timestamp),
        ("duration_s", ColumnType::Real),
        ("variant_index", ColumnType::Integer),
    ]);
    for t in &traces {
        table.push(vec![
            Value::Str(t.case_id.clone()),
            Value::Int(t.activities.len() as i64),
            t.start.map_or(Value::Null, Value::Time),
            t.end.map_or(Value::Null, Value::Time),
            Value::Real(t.duration_seconds()),
            Value::Int(index[&t.activities] as i64),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::test_support::simple_log;

    fn abc_log() -> EventLog {
        simple_log(&[
            ("1", "a", 0),
            ("1", "b", 10),
            ("2", "a", 0),
            ("2", "b", 20),
            ("3", "a", 0),
            ("3", "b", 30),
            ("4", "a", 0),
            ("4", "c", 5),
        ])
    }

    #[test]
    fn groups_and_orders_variants() {
        let log = abc_log();
        let vs = variants(&log);
        let got: Vec<_> = vs.iter().map(|v| (v.sequence.join(""), v.frequency)).collect();
        assert_eq!(got, [("ab".to_string(), 3), ("ac".to_string(), 1)]);
        assert_eq!(vs[0].mean_duration, 20.0);
        assert_eq!((vs[0].min_duration, vs[0].max_duration), (10.0, 30.0));
        assert_eq!(vs.iter().map(|v| v.frequency).sum::<usize>(), log.case_count());
    }

    #[test]
    fn truncates_to_top_n() {
        let t = variant_summary(&abc_log(), 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows[0][0], Value::from("a,b"));
    }

    #[test]
    fn single_event_cases_have_zero_duration() {
        let log = simple_log(&[("1", "a", 7), ("2", "a", 9)]);
        let t = variant_summary(&log, 10);
        assert_eq!(t.rows[0][3], Value::Real(0.0));
    }

    #[test]
    fn case_summary_rows() {
        let log = simple_log(&[("1", "a", 0), ("1", "b", 3600), ("2", "a", 0), ("2", "b", 1)]);
        let t = case_summary(&log);
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows[0][4], Value::Real(3600.0));
        assert_eq!(t.rows[0][5], t.rows[1][5]);
        assert!(case_summary(&simple_log(&[])).is_empty());
    }
}
