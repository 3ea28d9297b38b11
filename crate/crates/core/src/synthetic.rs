//! Seeded generators for process trees and event logs.

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::event_log::{Column, ColumnType, EventLog, RoleMap, Timestamp, Value};
use crate::mining::{Operator, ProcessTree};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn base_time() -> Timestamp {
    Utc.with_ymd_and_hms(2024, 1, 2, 9, 0, 0).unwrap()
}

/// A random block-structured tree using every label exactly once.
pub fn random_tree(rng: &mut impl Rng, labels: &[String]) -> ProcessTree {
    if labels.len() == 1 {
        let leaf = ProcessTree::Activity(labels[0].clone());
        return match rng.random_range(0..10) {
            0 => ProcessTree::xor(vec![leaf, ProcessTree::Silent]),
            1 => ProcessTree::looped(leaf, ProcessTree::Silent),
            _ => leaf,
        };
    }
    let op = match rng.random_range(0..7) {
        0 | 1 | 2 => Operator::Sequence,
        3 | 4 => Operator::Xor,
        5 => Operator::Parallel,
        _ => Operator::Loop,
    };
    let parts = if op == Operator::Loop { 2 } else { rng.random_range(2..=labels.len().min(3)) };
    // Cut points split the labels into `parts` non-empty runs.
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < parts - 1 {
        let c = rng.random_range(1..labels.len());
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut children = Vec::new();
    let mut from = 0;
    for c in cuts.into_iter().chain([labels.len()]) {
        children.push(random_tree(rng, &labels[from..c]));
        from = c;
    }
    ProcessTree::node(op, children)
}

/// One random trace of the tree. Loops repeat at most `max_redo` times.
pub fn playout(tree: &ProcessTree, rng: &mut impl Rng, max_redo: usize) -> Vec<String> {
    match tree {
        ProcessTree::Activity(a) => vec![a.clone()],
        ProcessTree::Silent => Vec::new(),
        ProcessTree::Node { op, children } => match op {
            Operator::Sequence => children.iter().flat_map(|c| playout(c, rng, max_redo)).collect(),
            Operator::Xor => {
                let i = rng.random_range(0..children.len());
                playout(&children[i], rng, max_redo)
            }
            Operator::Parallel => {
                let mut queues: Vec<std::collections::VecDeque<String>> =
                    children.iter().map(|c| playout(c, rng, max_redo).into()).collect();
                let mut out = Vec::new();
                loop {
                    let open: Vec<usize> = (0..queues.len()).filter(|&i| !queues[i].is_empty()).collect();
                    if open.is_empty() {
                        break out;
                    }
                    let i = open[rng.random_range(0..open.len())];
                    out.push(queues[i].pop_front().unwrap());
                }
            }
            Operator::Loop => {
                let mut out = playout(&children[0], rng, max_redo);
                for _ in 0..max_redo {
                    if !rng.random_bool(0.35) {
                        break;
                    }
                    out.extend(playout(&children[1], rng, max_redo));
                    out.extend(playout(&children[0], rng, max_redo));
                }
                out
            }
        },
    }
}

/// Cases `c1..cn`, one event per minute, cases an hour apart.
pub fn log_from_traces<S: AsRef<str>>(traces: &[Vec<S>]) -> EventLog {
    let columns = vec![
        Column::new("case_id", ColumnType::String),
        Column::new("activity", ColumnType::String),
        Column::new("timestamp", ColumnType::Timestamp),
    ];
    let mut rows = Vec::new();
    for (i, trace) in traces.iter().enumerate() {
        for (j, a) in trace.iter().enumerate() {
            let ts = base_time() + Duration::hours(i as i64) + Duration::minutes(j as i64);
            rows.push(vec![Value::Str(format!("c{}", i + 1)), Value::from(a.as_ref()), Value::Time(ts)]);
        }
    }
    EventLog::new(columns, rows, RoleMap::new("case_id", "activity", "timestamp")).expect("generated log is well formed")
}

fn alphabet(n: usize) -> Vec<String> {
    (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
}

/// Log whose behaviour comes from a random tree over 2..=6 activities.
/// Traces are non-empty and at most `max_events` long.
pub fn random_tree_log(seed: u64, max_cases: usize, max_events: usize) -> (ProcessTree, EventLog) {
    let mut rng = rng(seed);
    let labels = alphabet(rng.random_range(2..=6));
    let tree = random_tree(&mut rng, &labels);
    let cases = rng.random_range(1..=max_cases);
    let mut traces = Vec::with_capacity(cases);
    while traces.len() < cases {
        let t = playout(&tree, &mut rng, 2);
        if !t.is_empty() && t.len() <= max_events {
            traces.push(t);
        }
    }
    (tree, log_from_traces(&traces))
}

/// Arbitrary sequences over a small alphabet, no underlying model.
pub fn random_log(seed: u64, max_cases: usize, max_events: usize) -> EventLog {
    let mut rng = rng(seed);
    let labels = alphabet(rng.random_range(1..=5));
    let cases = rng.random_range(1..=max_cases);
    let traces: Vec<Vec<String>> = (0..cases)
        .map(|_| {
            let n = rng.random_range(1..=max_events);
            (0..n).map(|_| labels[rng.random_range(0..labels.len())].clone()).collect()
        })
        .collect();
    log_from_traces(&traces)
}

const CHANNELS: [&str; 3] = ["branch", "online", "partner"];

fn pick<'a>(rng: &mut impl Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

/// Loan applications: submission, parallel credit and document checks,
/// optional rounds of information requests, then approval or rejection.
/// Activity names carry `prefix` so that logs can be told apart.
pub fn loan_log(seed: u64, cases: usize, prefix: &str) -> EventLog {
    let mut rng = rng(seed);
    let columns = vec![
        Column::new("case_id", ColumnType::String),
        Column::new("activity", ColumnType::String),
        Column::new("timestamp", ColumnType::Timestamp),
        Column::new("resource", ColumnType::String),
        Column::new("amount", ColumnType::Real),
        Column::new("channel", ColumnType::String),
    ];
    let clerks = ["clerk_ana", "clerk_ben", "clerk_chen"];
    let analysts = ["analyst_dev", "analyst_eva"];
    let mut rows = Vec::new();
    for i in 0..cases {
        let case_id = format!("L{:04}", i + 1);
        let amount = (rng.random_range(20..=600) * 50) as f64;
        let channel = pick(&mut rng, &CHANNELS);
        let mut time = base_time() + Duration::minutes(i as i64 * rng.random_range(90..=240));
        let mut steps: Vec<(&str, &str)> = vec![("Submit application", "system")];
        let mut checks = [("Check credit", pick(&mut rng, &analysts)), ("Verify documents", pick(&mut rng, &clerks))];
        if rng.random_bool(0.5) {
            checks.swap(0, 1);
        }
        steps.extend(checks);
        while rng.random_bool(0.3) {
            steps.push(("Request information", pick(&mut rng, &clerks)));
            steps.push(("Verify documents", pick(&mut rng, &clerks)));
        }
        if amount > 25_000.0 && rng.random_bool(0.7) || rng.random_bool(0.15) {
            steps.push(("Reject application", pick(&mut rng, &analysts)));
        } else {
            steps.push(("Approve application", pick(&mut rng, &analysts)));
            steps.push(("Sign contract", pick(&mut rng, &clerks)));
        }
        steps.push(("Notify customer", "system"));
        for (activity, resource) in steps {
            rows.push(vec![
                Value::Str(case_id.clone()),
                Value::Str(format!("{prefix}{activity}")),
                Value::Time(time),
                Value::from(resource),
                Value::Real(amount),
                Value::from(channel),
            ]);
            time += Duration::minutes(rng.random_range(5..=600));
        }
    }
    EventLog::new(columns, rows, RoleMap::new("case_id", "activity", "timestamp").with_resource("resource"))
        .expect("generated log is well formed")
}
