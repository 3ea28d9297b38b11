use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::event_log::{ColumnType, EventLog, Value};
use crate::table::Table;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectlyFollowsGraph {
    pub activities: BTreeSet<String>,
    pub edge_counts: BTreeMap<(String, String), usize>,
    pub start_counts: BTreeMap<String, usize>,
    pub end_counts: BTreeMap<String, usize>,
}

impl DirectlyFollowsGraph {
    pub fn from_traces<'a, I, S>(traces: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut g = DirectlyFollowsGraph::default();
        for trace in traces {
            let (Some(first), Some(last)) = (trace.first(), trace.last()) else {
                continue;
            };
            *g.start_counts.entry(first.as_ref().to_string()).or_default() += 1;
            *g.end_counts.entry(last.as_ref().to_string()).or_default() += 1;
            for a in trace {
                g.activities.insert(a.as_ref().to_string());
            }
            for w in trace.windows(2) {
                let key = (w[0].as_ref().to_string(), w[1].as_ref().to_string());
                *g.edge_counts.entry(key).or_default() += 1;
            }
        }
        g
    }

    pub fn edge_total(&self) -> usize {
        self.edge_counts.values().sum()
    }
}

/// Counts adjacent activity pairs in every case's ordered trace.
pub fn compute_dfg(log: &EventLog) -> DirectlyFollowsGraph {
    let traces = log.traces();
    DirectlyFollowsGraph::from_traces(traces.iter().map(|t| t.activities.as_slice()))
}

/// Edge rows by count descending then lexicographically, followed by start
/// and end rows in the same order.
pub fn dfg_summary(dfg: &DirectlyFollowsGraph) -> Table {
    let mut table = Table::with_columns(&[
        ("kind", ColumnType::String),
        ("source", ColumnType::String),
        ("target", ColumnType::String),
        ("count", ColumnType::Integer),
    ]);
    let mut edges: Vec<_> = dfg.edge_counts.iter().collect();
    edges.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    for ((s, t), n) in edges {
        table.push(vec!["edge".into(), s.as_str().into(), t.as_str().into(), Value::Int(*n as i64)]);
    }
    let ranked = |m: &BTreeMap<String, usize>| {
        let mut v: Vec<(String, usize)> = m.iter().map(|(k, n)| (k.clone(), *n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    };
    for (a, n) in ranked(&dfg.start_counts) {
        table.push(vec!["start".into(), Value::Null, a.into(), Value::Int(n as i64)]);
    }
    for (a, n) in ranked(&dfg.end_counts) {
        table.push(vec!["end".into(), a.into(), Value::Null, Value::Int(n as i64)]);
    }
    table
}
