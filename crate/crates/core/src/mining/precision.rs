//! Escaping-edges precision.
//!
//! Every proper prefix of every trace is a state. The model enables a set
//! of activities there; the log shows which of them actually came next.
//! Enabled but never observed activities are escaping edges.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use super::petri::{NetIndex, PetriNet};
use super::replay::{Replayer, SILENT_SEARCH_CAP};
use super::MiningError;
use crate::event_log::EventLog;
use crate::par::{self, Parallelism};

/// Visible labels enabled in `marking` or after any sequence of silent firings.
pub(crate) fn enabled_labels<'a>(idx: &NetIndex<'a>, marking: &[u32]) -> BTreeSet<&'a str> {
    let mut out = BTreeSet::new();
    let mut seen = HashSet::from([marking.to_vec()]);
    let mut queue = VecDeque::from([marking.to_vec()]);
    while let Some(m) = queue.pop_front() {
        for (t, tr) in idx.net.transitions.iter().enumerate() {
            if !idx.enabled(&m, t) {
                continue;
            }
            match tr.label.as_deref() {
                Some(l) => {
                    out.insert(l);
                }
                None => {
                    let mut next = m.clone();
                    idx.fire(&mut next, t);
                    if seen.len() < SILENT_SEARCH_CAP && seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    out
}

#[derive(Default)]
struct PrefixState {
    weight: usize,
    next: BTreeSet<String>,
}

pub fn precision_escaping_edges(log: &EventLog, net: &PetriNet, parallelism: Parallelism) -> Result<f64, MiningError> {
    let replayer = Replayer::new(net)?;
    let mut prefixes: BTreeMap<&[String], PrefixState> = BTreeMap::new();
    let traces = log.traces();
    for t in &traces {
        for k in 0..t.activities.len() {
            let st = prefixes.entry(&t.activities[..k]).or_default();
            st.weight += 1;
            st.next.insert(t.activities[k].clone());
        }
    }
    let states: Vec<(&[String], PrefixState)> = prefixes.into_iter().collect();
    let per_state = par::map(parallelism, &states, |(prefix, st)| {
        let mut run = replayer.start();
        for a in prefix.iter() {
            replayer.step(&mut run, a);
        }
        if run.counts.missing > 0 {
            return None;
        }
        let enabled = enabled_labels(&replayer.idx, &run.marking);
        let escaping = enabled.iter().filter(|l| !st.next.contains(**l)).count();
        Some((st.weight * enabled.len(), st.weight * escaping))
    });
    let (enabled, escaping) = per_state
        .into_iter()
        .flatten()
        .fold((0usize, 0usize), |(e, x), (de, dx)| (e + de, x + dx));
    Ok(if enabled == 0 {
        1.0
    } else {
        1.0 - escaping as f64 / enabled as f64
    })
}
