use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::value::render_timestamp;
use super::{ColumnType, EventLog, RoleMap, Timestamp};

/// Longest sample value, in characters, carried into an abstraction.
pub const MAX_SAMPLE_CHARS: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionOptions {
    /// Sample values per column.
    pub samples: usize,
    /// Columns that contribute no samples.
    #[serde(default)]
    pub excluded: BTreeSet<String>,
}

impl Default for AbstractionOptions {
    fn default() -> Self {
        AbstractionOptions {
            samples: 5,
            excluded: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
    pub distinct_count: usize,
    pub null_count: usize,
    pub samples: Vec<String>,
}

/// Metadata-only snapshot of a log: schema, counts and a few samples.
/// Never contains event rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogAbstraction {
    pub columns: Vec<ColumnProfile>,
    pub roles: RoleMap,
    pub case_count: usize,
    pub event_count: usize,
    pub time_span: Option<(Timestamp, Timestamp)>,
}

fn clip(s: String) -> String {
    if s.chars().count() <= MAX_SAMPLE_CHARS {
        s
    } else {
        let mut out: String = s.chars().take(MAX_SAMPLE_CHARS - 1).collect();
        out.push('…');
        out
    }
}

pub fn extract_abstraction(log: &EventLog, options: &AbstractionOptions) -> LogAbstraction {
    let columns = log
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| {
            // value -> (count, first row)
            let mut freq: HashMap<String, (usize, usize)> = HashMap::new();
            let mut nulls = 0;
            for (i, row) in log.rows().iter().enumerate() {
                if row[j].is_null() {
                    nulls += 1;
                    continue;
                }
                freq.entry(row[j].render()).or_insert((0, i)).0 += 1;
            }
            let distinct_count = freq.len();
            let samples = if options.excluded.contains(&col.name) {
                Vec::new()
            } else {
                let mut ranked: Vec<(String, (usize, usize))> = freq.into_iter().collect();
                ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
                ranked
                    .into_iter()
                    .take(options.samples)
                    .map(|(v, _)| clip(v))
                    .collect()
            };
            ColumnProfile {
                name: col.name.clone(),
                ty: col.ty,
                distinct_count,
                null_count: nulls,
                samples,
            }
        })
        .collect();
    LogAbstraction {
        columns,
        roles: log.roles().clone(),
        case_count: log.case_count(),
        event_count: log.event_count(),
        time_span: log.time_span(),
    }
}

impl LogAbstraction {
    /// Compact text form embedded in prompts.
    pub fn to_prompt_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cases: {}", self.case_count);
        let _ = writeln!(out, "events: {}", self.event_count);
        if let Some((lo, hi)) = &self.time_span {
            let _ = writeln!(out, "time span: {} .. {}", render_timestamp(lo), render_timestamp(hi));
        }
        let _ = writeln!(out, "columns:");
        for c in &self.columns {
            let samples = c
                .samples
                .iter()
                .map(|s| format!("{s:?}"))
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(
                out,
                "- {} ({}): {} distinct, {} null; samples: [{}]",
                c.name, c.ty, c.distinct_count, c.null_count, samples
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::test_support::*;
    use crate::event_log::{Column, EventLog, Value};

    fn log_with_activities(counts: &[(&str, usize)]) -> EventLog {
        let mut events = Vec::new();
        let mut n = 0i64;
        for (act, c) in counts {
            for _ in 0..*c {
                events.push((format!("case{}", n % 50), act.to_string(), n));
                n += 1;
            }
        }
        let borrowed: Vec<(&str, &str, i64)> =
            events.iter().map(|(c, a, s)| (c.as_str(), a.as_str(), *s)).collect();
        simple_log(&borrowed)
    }

    #[test]
    fn top_k_by_frequency() {
        let counts = [("g", 10), ("a", 300), ("b", 250), ("c", 200), ("d", 150), ("e", 60), ("f", 30)];
        let log = log_with_activities(&counts);
        assert_eq!(log.event_count(), 1000);
        let abs = extract_abstraction(&log, &AbstractionOptions::default());
        let act = abs.columns.iter().find(|c| c.name == "activity").unwrap();
        assert_eq!(act.distinct_count, 7);
        // Frequency oracle: sort the fixture table directly.
        let mut oracle = counts.to_vec();
        oracle.sort_by(|x, y| y.1.cmp(&x.1));
        let expected: Vec<&str> = oracle.iter().take(5).map(|(a, _)| *a).collect();
        assert_eq!(act.samples, expected);
        assert_eq!(abs.case_count, 50);
    }

    #[test]
    fn zero_samples() {
        let log = simple_log(&[("1", "a", 0), ("2", "b", 1)]);
        let abs = extract_abstraction(
            &log,
            &AbstractionOptions {
                samples: 0,
                ..Default::default()
            },
        );
        assert!(abs.columns.iter().all(|c| c.samples.is_empty()));
        assert_eq!(abs.event_count, 2);
        assert_eq!(abs.columns[1].distinct_count, 2);
    }

    #[test]
    fn frequency_ties_break_by_first_occurrence() {
        let log = simple_log(&[("1", "z", 0), ("1", "y", 1), ("1", "x", 2)]);
        let abs = extract_abstraction(
            &log,
            &AbstractionOptions {
                samples: 2,
                ..Default::default()
            },
        );
        assert_eq!(abs.columns[1].samples, ["z", "y"]);
    }

    #[test]
    fn excluded_column_has_no_samples() {
        let columns = vec![
            Column::new("case", ColumnType::String),
            Column::new("activity", ColumnType::String),
            Column::new("time", ColumnType::Timestamp),
            Column::new("customer_name", ColumnType::String),
        ];
        let rows = (0..20)
            .map(|i| {
                vec![
                    Value::from(format!("c{i}")),
                    Value::from("a"),
                    Value::Time(t(i)),
                    Value::from(if i == 0 { "SENTINEL-NAME" } else { "Jane" }),
                ]
            })
            .collect();
        let log = EventLog::new(columns, rows, RoleMap::new("case", "activity", "time")).unwrap();
        let opts = AbstractionOptions {
            samples: 5,
            excluded: ["customer_name".to_string()].into(),
        };
        let abs = extract_abstraction(&log, &opts);
        let cust = &abs.columns[3];
        assert!(cust.samples.is_empty());
        assert_eq!(cust.distinct_count, 2);
        let json = serde_json::to_string(&abs).unwrap();
        assert!(!json.contains("SENTINEL-NAME"));
        assert!(!abs.to_prompt_text().contains("SENTINEL-NAME"));
    }

    #[test]
    fn empty_log_yields_zero_counts() {
        let log = simple_log(&[]);
        let abs = extract_abstraction(&log, &AbstractionOptions::default());
        assert_eq!((abs.case_count, abs.event_count), (0, 0));
        assert!(abs.time_span.is_none());
    }

    #[test]
    fn long_samples_are_clipped() {
        let long = "x".repeat(500);
        let log = simple_log(&[("1", long.as_str(), 0)]);
        let abs = extract_abstraction(&log, &AbstractionOptions::default());
        assert_eq!(abs.columns[1].samples[0].chars().count(), MAX_SAMPLE_CHARS);
    }
}
