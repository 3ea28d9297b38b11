//! Optimal alignments over the synchronous product of trace and net.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::petri::{Marking, NetIndex, PetriNet};
use super::precision::precision_escaping_edges;
use super::{f1_score, variant_groups, CaseConformance, CaseDiagnostics, ConformanceResult, MiningError};
use crate::event_log::EventLog;
use crate::par::{self, Parallelism};

pub const DEFAULT_STATE_BUDGET: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentCosts {
    pub log_move: u32,
    pub model_move: u32,
}

impl Default for AlignmentCosts {
    fn default() -> Self {
        AlignmentCosts {
            log_move: 1,
            model_move: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignOptions {
    pub costs: AlignmentCosts,
    /// Maximum number of search states expanded per variant.
    pub state_budget: usize,
    pub parallelism: Parallelism,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            costs: AlignmentCosts::default(),
            state_budget: DEFAULT_STATE_BUDGET,
            parallelism: Parallelism::default(),
        }
    }
}

/// Move counts of one optimal alignment. `cost` is `None` when the final
/// marking cannot be reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentStats {
    pub cost: Option<u64>,
    pub sync_moves: u32,
    pub log_moves: u32,
    pub model_moves: u32,
    pub silent_moves: u32,
}

impl AlignmentStats {
    const UNREACHABLE: AlignmentStats = AlignmentStats {
        cost: None,
        sync_moves: 0,
        log_moves: 0,
        model_moves: 0,
        silent_moves: 0,
    };
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Moves {
    sync: u32,
    log: u32,
    model: u32,
    silent: u32,
}

pub(crate) struct Aligner<'a> {
    idx: NetIndex<'a>,
    costs: AlignmentCosts,
    budget: usize,
}

impl<'a> Aligner<'a> {
    pub fn new(net: &'a PetriNet, costs: AlignmentCosts, budget: usize) -> Result<Self, MiningError> {
        net.workflow_places()?;
        Ok(Aligner {
            idx: NetIndex::new(net),
            costs,
            budget,
        })
    }

    /// Dijkstra with a heuristic counting events no transition can match.
    pub fn align(&self, trace: &[String]) -> Result<AlignmentStats, MiningError> {
        let net = self.idx.net;
        let known: HashSet<&str> = net.transitions.iter().filter_map(|t| t.label.as_deref()).collect();
        // unmatched[i]: events at or after i with no transition label.
        let mut unmatched = vec![0u64; trace.len() + 1];
        for i in (0..trace.len()).rev() {
            unmatched[i] = unmatched[i + 1] + u64::from(!known.contains(trace[i].as_str()));
        }
        let h = |pos: usize| unmatched[pos] * u64::from(self.costs.log_move);

        type State = (Marking, usize);
        let mut best: HashMap<State, u64> = HashMap::new();
        let mut heap = BinaryHeap::new();
        let start: State = (net.initial_marking.clone(), 0);
        best.insert(start.clone(), 0);
        let zero = Moves { sync: 0, log: 0, model: 0, silent: 0 };
        heap.push(Reverse((h(0), 0u64, zero, start)));
        let mut expanded = 0usize;

        while let Some(Reverse((_, g, moves, (marking, pos)))) = heap.pop() {
            if best.get(&(marking.clone(), pos)).is_some_and(|&b| b < g) {
                continue;
            }
            if pos == trace.len() && marking == net.final_marking {
                return Ok(AlignmentStats {
                    cost: Some(g),
                    sync_moves: moves.sync,
                    log_moves: moves.log,
                    model_moves: moves.model,
                    silent_moves: moves.silent,
                });
            }
            expanded += 1;
            if expanded > self.budget {
                return Err(MiningError::StateBudgetExceeded { budget: self.budget });
            }
            let mut push = |m: Marking, p: usize, step: u64, mv: Moves| {
                let ng = g + step;
                let key = (m, p);
                if best.get(&key).is_none_or(|&b| ng < b) {
                    best.insert(key.clone(), ng);
                    heap.push(Reverse((ng + h(p), ng, mv, key)));
                }
            };
            if pos < trace.len() {
                push(marking.clone(), pos + 1, self.costs.log_move.into(), Moves { log: moves.log + 1, ..moves });
            }
            for (t, tr) in net.transitions.iter().enumerate() {
                if !self.idx.enabled(&marking, t) {
                    continue;
                }
                let mut next = marking.clone();
                self.idx.fire(&mut next, t);
                match tr.label.as_deref() {
                    None => push(next, pos, 0, Moves { silent: moves.silent + 1, ..moves }),
                    Some(label) => {
                        if pos < trace.len() && trace[pos] == label {
                            push(next.clone(), pos + 1, 0, Moves { sync: moves.sync + 1, ..moves });
                        }
                        push(next, pos, self.costs.model_move.into(), Moves { model: moves.model + 1, ..moves });
                    }
                }
            }
        }
        Ok(AlignmentStats::UNREACHABLE)
    }
}

/// Optimal alignment of a single activity sequence.
pub fn align_trace<S: AsRef<str>>(
    net: &PetriNet,
    trace: &[S],
    costs: AlignmentCosts,
    state_budget: usize,
) -> Result<AlignmentStats, MiningError> {
    let trace: Vec<String> = trace.iter().map(|s| s.as_ref().to_string()).collect();
    Aligner::new(net, costs, state_budget)?.align(&trace)
}

/// Case fitness from an optimal cost and the normaliser of the trace.
fn case_fitness(stats: &AlignmentStats, len: usize, costs: AlignmentCosts, model_only: Option<u64>) -> f64 {
    let (Some(cost), Some(empty)) = (stats.cost, model_only) else {
        return 0.0;
    };
    let worst = len as u64 * u64::from(costs.log_move) + empty;
    if worst == 0 {
        1.0
    } else {
        1.0 - cost as f64 / worst as f64
    }
}

pub fn align(log: &EventLog, net: &PetriNet, options: &AlignOptions) -> Result<ConformanceResult, MiningError> {
    let aligner = Aligner::new(net, options.costs, options.state_budget)?;
    let model_only = aligner.align(&[])?.cost;
    let traces = log.traces();
    let groups = variant_groups(&traces);
    let results = par::try_map(options.parallelism, &groups, |(seq, _)| aligner.align(seq))?;

    let mut per_case = vec![None; traces.len()];
    let mut weighted = 0.0;
    for ((seq, members), stats) in groups.iter().zip(&results) {
        let fitness = case_fitness(stats, seq.len(), options.costs, model_only);
        weighted += fitness * members.len() as f64;
        for &i in members {
            per_case[i] = Some(CaseConformance {
                case_id: traces[i].case_id.clone(),
                fitness,
                diagnostics: CaseDiagnostics::Alignment(*stats),
            });
        }
    }
    let fitness = if traces.is_empty() { 1.0 } else { weighted / traces.len() as f64 };
    let precision = precision_escaping_edges(log, net, options.parallelism)?;
    Ok(ConformanceResult {
        fitness,
        precision,
        f1: f1_score(fitness, precision),
        per_case: per_case.into_iter().map(|c| c.expect("every case grouped")).collect(),
    })
}
