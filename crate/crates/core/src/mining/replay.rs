//! Token-based replay.
//!
//! Each event fires the transition carrying its label. If that transition is
//! not enabled, the shortest sequence of silent transitions that enables it
//! is fired first; failing that, the missing tokens are created and counted.
//! The initial token counts as produced and the final token as consumed.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::petri::{Marking, NetIndex, PetriNet};
use super::precision::precision_escaping_edges;
use super::{f1_score, variant_groups, CaseConformance, CaseDiagnostics, ConformanceResult, MiningError};
use crate::event_log::EventLog;
use crate::par::{self, Parallelism};

/// Markings explored per silent-path search.
pub(crate) const SILENT_SEARCH_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayAccounting {
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
}

impl ReplayAccounting {
    pub fn fitness(&self) -> f64 {
        let part = |bad: u64, total: u64| if total == 0 { 1.0 } else { 1.0 - bad as f64 / total as f64 };
        0.5 * part(self.missing, self.consumed) + 0.5 * part(self.remaining, self.produced)
    }

    fn add(&mut self, other: &ReplayAccounting, times: u64) {
        self.produced += other.produced * times;
        self.consumed += other.consumed * times;
        self.missing += other.missing * times;
        self.remaining += other.remaining * times;
    }
}

/// Breadth-first search over markings reachable by silent firings only.
/// Returns the transitions of a shortest path to a marking satisfying `goal`.
pub(crate) fn silent_path(
    idx: &NetIndex,
    from: &[u32],
    goal: impl Fn(&[u32]) -> bool,
) -> Option<Vec<usize>> {
    if goal(from) {
        return Some(Vec::new());
    }
    let mut parent: HashMap<Marking, (Marking, usize)> = HashMap::new();
    let mut queue = VecDeque::from([from.to_vec()]);
    let root = from.to_vec();
    while let Some(m) = queue.pop_front() {
        for &t in &idx.silent {
            if !idx.enabled(&m, t) {
                continue;
            }
            let mut next = m.clone();
            idx.fire(&mut next, t);
            if next == root || parent.contains_key(&next) {
                continue;
            }
            parent.insert(next.clone(), (m.clone(), t));
            if goal(&next) {
                let mut path = vec![t];
                let mut cur = m;
                while cur != root {
                    let (prev, tt) = parent[&cur].clone();
                    path.push(tt);
                    cur = prev;
                }
                path.reverse();
                return Some(path);
            }
            if parent.len() >= SILENT_SEARCH_CAP {
                return None;
            }
            queue.push_back(next);
        }
    }
    None
}

#[derive(Debug, Clone)]
pub(crate) struct ReplayState {
    pub marking: Marking,
    pub counts: ReplayAccounting,
    /// Tokens produced by events whose label is not in the net.
    orphans: u64,
}

pub(crate) struct Replayer<'a> {
    pub idx: NetIndex<'a>,
    labels: HashMap<&'a str, usize>,
    sink: usize,
}

impl<'a> Replayer<'a> {
    pub fn new(net: &'a PetriNet) -> Result<Self, MiningError> {
        let (_, sink) = net.workflow_places()?;
        let idx = NetIndex::new(net);
        let labels = idx.label_map()?;
        Ok(Replayer { idx, labels, sink })
    }

    pub fn start(&self) -> ReplayState {
        ReplayState {
            marking: self.idx.net.initial_marking.clone(),
            counts: ReplayAccounting {
                produced: 1,
                ..Default::default()
            },
            orphans: 0,
        }
    }

    fn fire_counted(&self, st: &mut ReplayState, t: usize) {
        st.counts.consumed += self.idx.pre[t].len() as u64;
        st.counts.produced += self.idx.post[t].len() as u64;
        self.idx.fire(&mut st.marking, t);
    }

    pub fn step(&self, st: &mut ReplayState, activity: &str) {
        let Some(&t) = self.labels.get(activity) else {
            // Unknown label: one missing token in, one stranded token out.
            st.counts.consumed += 1;
            st.counts.missing += 1;
            st.counts.produced += 1;
            st.orphans += 1;
            return;
        };
        if !self.idx.enabled(&st.marking, t) {
            if let Some(path) = silent_path(&self.idx, &st.marking, |m| self.idx.enabled(m, t)) {
                for s in path {
                    self.fire_counted(st, s);
                }
            }
        }
        for &p in &self.idx.pre[t] {
            if st.marking[p] == 0 {
                st.marking[p] += 1;
                st.counts.missing += 1;
            }
        }
        self.fire_counted(st, t);
    }

    pub fn finish(&self, mut st: ReplayState) -> ReplayAccounting {
        let target = &self.idx.net.final_marking;
        if let Some(path) = silent_path(&self.idx, &st.marking, |m| m == target.as_slice()) {
            for s in path {
                self.fire_counted(&mut st, s);
            }
        }
        st.counts.consumed += 1;
        if st.marking[self.sink] > 0 {
            st.marking[self.sink] -= 1;
        } else {
            st.counts.missing += 1;
        }
        st.counts.remaining = st.marking.iter().map(|&n| n as u64).sum::<u64>() + st.orphans;
        st.counts
    }

    pub fn replay(&self, trace: &[String]) -> ReplayAccounting {
        let mut st = self.start();
        for a in trace {
            self.step(&mut st, a);
        }
        self.finish(st)
    }
}

/// Fitness of every case by token accounting; precision by escaping edges.
pub fn token_replay(
    log: &EventLog,
    net: &PetriNet,
    parallelism: Parallelism,
) -> Result<ConformanceResult, MiningError> {
    let replayer = Replayer::new(net)?;
    let traces = log.traces();
    let groups = variant_groups(&traces);
    let results = par::map(parallelism, &groups, |(seq, _)| replayer.replay(seq));

    let mut total = ReplayAccounting::default();
    let mut per_case = vec![None; traces.len()];
    for ((_, members), acc) in groups.iter().zip(&results) {
        total.add(acc, members.len() as u64);
        for &i in members {
            per_case[i] = Some(CaseConformance {
                case_id: traces[i].case_id.clone(),
                fitness: acc.fitness(),
                diagnostics: CaseDiagnostics::Replay(*acc),
            });
        }
    }
    let fitness = if traces.is_empty() { 1.0 } else { total.fitness() };
    let precision = precision_escaping_edges(log, net, parallelism)?;
    Ok(ConformanceResult {
        fitness,
        precision,
        f1: f1_score(fitness, precision),
        per_case: per_case.into_iter().map(|c| c.expect("every case grouped")).collect(),
    })
}
