//! Discovery, summaries and conformance checking over event logs.

mod alignment;
mod dfg;
mod discovery;
mod export;
mod petri;
mod precision;
mod replay;
mod summary;
mod tree;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_log::{ColumnType, Trace, Value};
use crate::table::Table;

pub use alignment::{align, align_trace, AlignOptions, AlignmentCosts, AlignmentStats, DEFAULT_STATE_BUDGET};
pub use dfg::{compute_dfg, dfg_summary, DirectlyFollowsGraph};
pub use discovery::{discover_from_traces, discover_inductive, flower_model};
pub use export::{petri_to_dot, petri_to_pnml};
pub use petri::{model_summary, tree_to_petri, Arc, Marking, ModelSummary, PetriNet, Place, Transition};
pub use precision::precision_escaping_edges;
pub use replay::{token_replay, ReplayAccounting};
pub use summary::{case_summary, variant_summary, variants, Variant, DEFAULT_TOP_VARIANTS};
pub use tree::{Operator, ProcessTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MiningError {
    #[error("cannot discover a model from an empty log")]
    EmptyLog,
    #[error("not a workflow net: {0}")]
    NotWorkflowNet(String),
    #[error("activity label {0:?} appears on more than one transition")]
    DuplicateLabel(String),
    #[error("alignment search exceeded its budget of {budget} states")]
    StateBudgetExceeded { budget: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CaseDiagnostics {
    Replay(ReplayAccounting),
    Alignment(AlignmentStats),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConformance {
    pub case_id: String,
    pub fitness: f64,
    pub diagnostics: CaseDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceResult {
    pub fitness: f64,
    pub precision: f64,
    pub f1: f64,
    pub per_case: Vec<CaseConformance>,
}

impl ConformanceResult {
    /// One row: fitness, precision, f1.
    pub fn to_table(&self) -> Table {
        let mut t = Table::with_columns(&[
            ("fitness", ColumnType::Real),
            ("precision", ColumnType::Real),
            ("f1", ColumnType::Real),
        ]);
        t.push(vec![Value::Real(self.fitness), Value::Real(self.precision), Value::Real(self.f1)]);
        t
    }
}

/// Harmonic mean, 0 when either side is 0.
pub fn f1_score(fitness: f64, precision: f64) -> f64 {
    if fitness + precision <= 0.0 || fitness == 0.0 || precision == 0.0 {
        0.0
    } else {
        2.0 * fitness * precision / (fitness + precision)
    }
}

/// Distinct activity sequences with the trace indices sharing each one,
/// in order of first appearance.
pub(crate) fn variant_groups(traces: &[Trace]) -> Vec<(Vec<String>, Vec<usize>)> {
    let mut index: HashMap<&[String], usize> = HashMap::new();
    let mut groups: Vec<(Vec<String>, Vec<usize>)> = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        let g = *index.entry(&t.activities).or_insert_with(|| {
            groups.push((t.activities.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_is_harmonic_mean() {
        assert_eq!(f1_score(0.0, 1.0), 0.0);
        assert_eq!(f1_score(1.0, 1.0), 1.0);
        assert!((f1_score(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn result_table_has_one_row() {
        let r = ConformanceResult {
            fitness: 0.5,
            precision: 1.0,
            f1: f1_score(0.5, 1.0),
            per_case: vec![],
        };
        let t = r.to_table();
        assert_eq!(t.len(), 1);
        assert_eq!(t.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(), ["fitness", "precision", "f1"]);
    }
}
