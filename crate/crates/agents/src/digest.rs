//! Compact artifact descriptions for the analyst.

use std::collections::HashMap;
use std::fmt::Write as _;

use pmax_core::artifacts::{Artifact, ArtifactError, ArtifactStore, Payload};
use pmax_core::event_log::{render_timestamp, ColumnType, Value};
use pmax_core::mining::model_summary;
use pmax_core::table::Table;

/// Categorical values listed per column in a large-table digest.
pub const TOP_VALUES: usize = 5;

pub fn summarize(store: &ArtifactStore, id: &str, row_threshold: usize) -> Result<String, ArtifactError> {
    let a = store.get(id).ok_or_else(|| ArtifactError::UnknownArtifact(id.to_string()))?;
    Ok(summarize_artifact(a, row_threshold))
}

pub fn summarize_artifact(artifact: &Artifact, row_threshold: usize) -> String {
    let mut out = format!(
        "### {} ({}): {}\n",
        artifact.id,
        artifact.kind().as_str(),
        artifact.description
    );
    match &artifact.payload {
        Payload::Table(t) => out.push_str(&summarize_table(t, row_threshold)),
        Payload::Chart(c) => {
            let _ = write!(out, "chart: mark={} x={}", c.mark.as_str(), c.x);
            if let Some(y) = &c.y {
                let _ = write!(out, " y={y}");
            }
            if let Some(title) = &c.title {
                let _ = write!(out, " title={title:?}");
            }
            out.push_str("\ndata:\n");
            out.push_str(&summarize_table(&c.data, row_threshold));
        }
        Payload::PetriNet(net) => {
            out.push_str(&model_summary(net).to_text());
            out.push('\n');
        }
    }
    out
}

/// Full markdown up to `row_threshold` rows, statistics beyond.
pub fn summarize_table(t: &Table, row_threshold: usize) -> String {
    if t.len() <= row_threshold {
        return t.to_markdown();
    }
    let mut out = String::new();
    let _ = writeln!(out, "rows: {}", t.len());
    let cols: Vec<String> = t
        .columns
        .iter()
        .map(|c| format!("{} ({})", c.name, c.ty.as_str()))
        .collect();
    let _ = writeln!(out, "columns: {}", cols.join(", "));
    for (j, col) in t.columns.iter().enumerate() {
        let values: Vec<&Value> = t.rows.iter().map(|r| &r[j]).filter(|v| !v.is_null()).collect();
        let nulls = t.len() - values.len();
        let null_note = if nulls > 0 { format!(", nulls={nulls}") } else { String::new() };
        if values.is_empty() {
            let _ = writeln!(out, "- {}: all null", col.name);
            continue;
        }
        match col.ty {
            ColumnType::Integer | ColumnType::Real => {
                let xs: Vec<f64> = values.iter().filter_map(|v| v.as_f64()).collect();
                let s = Stats::of(&xs);
                let _ = writeln!(
                    out,
                    "- {}: min={} max={} mean={} std={}{null_note}",
                    col.name,
                    num(s.min),
                    num(s.max),
                    num(s.mean),
                    num(s.std)
                );
            }
            ColumnType::Timestamp => {
                let mut ts: Vec<_> = values.iter().filter_map(|v| v.as_time()).collect();
                ts.sort();
                let _ = writeln!(
                    out,
                    "- {}: min={} max={}{null_note}",
                    col.name,
                    render_timestamp(&ts[0]),
                    render_timestamp(&ts[ts.len() - 1])
                );
            }
            _ => {
                let mut freq: HashMap<String, (usize, usize)> = HashMap::new();
                for (i, v) in values.iter().enumerate() {
                    freq.entry(v.render()).or_insert((0, i)).0 += 1;
                }
                if freq.len() == values.len() {
                    // identifiers carry no distribution worth showing
                    let _ = writeln!(out, "- {}: {} distinct values, all unique{null_note}", col.name, freq.len());
                    continue;
                }
                let mut ranked: Vec<_> = freq.iter().collect();
                ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
                let top: Vec<String> = ranked
                    .iter()
                    .take(TOP_VALUES)
                    .map(|(v, (n, _))| format!("{v:?} ({n})"))
                    .collect();
                let _ = writeln!(
                    out,
                    "- {}: {} distinct; top: {}{null_note}",
                    col.name,
                    freq.len(),
                    top.join(", ")
                );
            }
        }
    }
    out
}

struct Stats {
    min: f64,
    max: f64,
    mean: f64,
    std: f64,
}

impl Stats {
    /// Sample standard deviation; zero for a single value.
    fn of(xs: &[f64]) -> Stats {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Stats {
            min: xs.iter().cloned().fold(f64::INFINITY, f64::min),
            max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
        }
    }
}

fn num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x:.4}")
    }
}
