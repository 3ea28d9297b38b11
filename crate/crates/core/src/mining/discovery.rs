//! Inductive discovery of process trees.
//!
//! The log is split recursively. At each step the directly-follows graph of
//! the current sub-log is tested for an exclusive-choice, sequence, parallel,
//! then loop cut (first match wins), the sub-log is partitioned accordingly,
//! and each part is mined on its own. Empty traces become a silent option.
//! When no cut applies the flower model is emitted. Every split keeps each
//! trace replayable in the composed tree, so the result always fits the log.

use std::collections::{BTreeMap, BTreeSet};

use super::tree::ProcessTree;
use super::MiningError;
use crate::event_log::EventLog;

/// Trace multiset over interned activity ids.
type SubLog = BTreeMap<Vec<usize>, usize>;

struct Dfg {
    /// Activities present, ascending.
    nodes: Vec<usize>,
    edges: BTreeSet<(usize, usize)>,
    starts: BTreeSet<usize>,
    ends: BTreeSet<usize>,
}

impl Dfg {
    fn of(log: &SubLog) -> Self {
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        let mut starts = BTreeSet::new();
        let mut ends = BTreeSet::new();
        for trace in log.keys() {
            if let (Some(&f), Some(&l)) = (trace.first(), trace.last()) {
                starts.insert(f);
                ends.insert(l);
            }
            nodes.extend(trace.iter().copied());
            for w in trace.windows(2) {
                edges.insert((w[0], w[1]));
            }
        }
        Dfg {
            nodes: nodes.into_iter().collect(),
            edges,
            starts,
            ends,
        }
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a, b))
    }
}

/// Union-find over positions `0..n`.
struct Groups {
    parent: Vec<usize>,
}

impl Groups {
    fn new(n: usize) -> Self {
        Groups {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Partition as position lists, ordered by smallest member.
    fn classes(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.parent.len() {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = by_root.into_values().collect();
        out.sort_by_key(|c| c[0]);
        out
    }
}

/// Maps partition positions back to activity ids.
fn to_activities(dfg: &Dfg, classes: Vec<Vec<usize>>) -> Vec<BTreeSet<usize>> {
    classes
        .into_iter()
        .map(|c| c.into_iter().map(|i| dfg.nodes[i]).collect())
        .collect()
}

fn xor_cut(dfg: &Dfg) -> Option<Vec<BTreeSet<usize>>> {
    let n = dfg.nodes.len();
    let pos = |a: usize| dfg.nodes.binary_search(&a).expect("node present");
    let mut g = Groups::new(n);
    for &(a, b) in &dfg.edges {
        g.union(pos(a), pos(b));
    }
    let classes = g.classes();
    (classes.len() > 1).then(|| to_activities(dfg, classes))
}

fn reachability(dfg: &Dfg) -> Vec<Vec<bool>> {
    let n = dfg.nodes.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = dfg.has(dfg.nodes[i], dfg.nodes[j]);
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

fn sequence_cut(dfg: &Dfg) -> Option<Vec<BTreeSet<usize>>> {
    let n = dfg.nodes.len();
    let reach = reachability(dfg);
    let mut g = Groups::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if reach[i][j] && reach[j][i] {
                g.union(i, j);
            }
        }
    }
    // Merge groups that are mutually unreachable until every pair is ordered.
    let mut classes = g.classes();
    loop {
        let reaches = |x: &[usize], y: &[usize]| x.iter().any(|&a| y.iter().any(|&b| reach[a][b]));
        let mut merged = None;
        'search: for x in 0..classes.len() {
            for y in x + 1..classes.len() {
                if !reaches(&classes[x], &classes[y]) && !reaches(&classes[y], &classes[x]) {
                    merged = Some((x, y));
                    break 'search;
                }
            }
        }
        match merged {
            Some((x, y)) => {
                let moved = classes.remove(y);
                classes[x].extend(moved);
                classes[x].sort_unstable();
            }
            None => break,
        }
    }
    if classes.len() < 2 {
        return None;
    }
    // Earlier groups reach more of the others.
    let reach_count = |c: &[usize], all: &[Vec<usize>]| {
        all.iter()
            .filter(|o| o.as_slice() != c && c.iter().any(|&a| o.iter().any(|&b| reach[a][b])))
            .count()
    };
    let mut keyed: Vec<(usize, Vec<usize>)> = classes
        .iter()
        .map(|c| (reach_count(c, &classes), c.clone()))
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1[0].cmp(&b.1[0])));
    let ordered: Vec<Vec<usize>> = keyed.into_iter().map(|(_, c)| c).collect();

    let mut rank = vec![0usize; n];
    for (r, c) in ordered.iter().enumerate() {
        for &i in c {
            rank[i] = r;
        }
    }
    let pos = |a: usize| dfg.nodes.binary_search(&a).expect("node present");
    let backward = dfg.edges.iter().any(|&(a, b)| rank[pos(a)] > rank[pos(b)]);
    (!backward).then(|| to_activities(dfg, ordered))
}

fn parallel_cut(dfg: &Dfg) -> Option<Vec<BTreeSet<usize>>> {
    let n = dfg.nodes.len();
    let mut g = Groups::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (dfg.nodes[i], dfg.nodes[j]);
            if !(dfg.has(a, b) && dfg.has(b, a)) {
                g.union(i, j);
            }
        }
    }
    let groups = to_activities(dfg, g.classes());
    let complete = |c: &BTreeSet<usize>| {
        c.iter().any(|a| dfg.starts.contains(a)) && c.iter().any(|a| dfg.ends.contains(a))
    };
    let (mut good, partial): (Vec<_>, Vec<_>) = groups.into_iter().partition(complete);
    if good.len() < 2 {
        return None;
    }
    for p in partial {
        good[0].extend(p);
    }
    good.sort_by_key(|c| *c.iter().next().expect("non-empty group"));
    Some(good)
}

/// Returns the do-part followed by one or more redo groups.
fn loop_cut(dfg: &Dfg) -> Option<Vec<BTreeSet<usize>>> {
    let mut body: BTreeSet<usize> = dfg.starts.union(&dfg.ends).copied().collect();
    let rest: Vec<usize> = dfg.nodes.iter().copied().filter(|a| !body.contains(a)).collect();
    if rest.is_empty() {
        return None;
    }
    let pos = |a: usize| rest.binary_search(&a).expect("rest node");
    let mut g = Groups::new(rest.len());
    for &(a, b) in &dfg.edges {
        if !body.contains(&a) && !body.contains(&b) {
            g.union(pos(a), pos(b));
        }
    }
    let components: Vec<BTreeSet<usize>> = g
        .classes()
        .into_iter()
        .map(|c| c.into_iter().map(|i| rest[i]).collect())
        .collect();
    let mut redo = Vec::new();
    for comp in components {
        let mut ok = true;
        for &c in &comp {
            let mut to_start = false;
            let mut from_end = false;
            for &x in &body {
                if dfg.has(c, x) {
                    ok &= dfg.starts.contains(&x);
                    to_start |= dfg.starts.contains(&x);
                }
                if dfg.has(x, c) {
                    ok &= dfg.ends.contains(&x);
                    from_end |= dfg.ends.contains(&x);
                }
            }
            if to_start {
                ok &= dfg.starts.iter().all(|&s| dfg.has(c, s));
            }
            if from_end {
                ok &= dfg.ends.iter().all(|&e| dfg.has(e, c));
            }
        }
        if ok {
            redo.push(comp);
        } else {
            body.extend(comp);
        }
    }
    if redo.is_empty() {
        return None;
    }
    let mut out = vec![body];
    out.extend(redo);
    Some(out)
}

fn add(log: &mut SubLog, trace: Vec<usize>, n: usize) {
    *log.entry(trace).or_default() += n;
}

fn group_of(groups: &[BTreeSet<usize>], a: usize) -> usize {
    groups.iter().position(|g| g.contains(&a)).expect("activity in some group")
}

/// Projects every trace onto every group.
fn project(log: &SubLog, groups: &[BTreeSet<usize>]) -> Vec<SubLog> {
    let mut parts = vec![SubLog::new(); groups.len()];
    for (trace, &n) in log {
        for (g, part) in groups.iter().zip(&mut parts) {
            add(part, trace.iter().copied().filter(|a| g.contains(a)).collect(), n);
        }
    }
    parts
}

/// A trace lies entirely inside one group.
fn split_xor(log: &SubLog, groups: &[BTreeSet<usize>]) -> Vec<SubLog> {
    let mut parts = vec![SubLog::new(); groups.len()];
    for (trace, &n) in log {
        add(&mut parts[group_of(groups, trace[0])], trace.clone(), n);
    }
    parts
}

/// Cuts each trace into maximal runs of body and redo activities.
fn split_loop(log: &SubLog, groups: &[BTreeSet<usize>]) -> Vec<SubLog> {
    let mut parts = vec![SubLog::new(); groups.len()];
    for (trace, &n) in log {
        let mut run: Vec<usize> = Vec::new();
        let mut current = group_of(groups, trace[0]);
        for &a in trace {
            let g = group_of(groups, a);
            if (g == 0) != (current == 0) {
                add(&mut parts[current], std::mem::take(&mut run), n);
                current = g;
            }
            run.push(a);
        }
        add(&mut parts[current], run, n);
    }
    parts
}

struct Miner<'a> {
    names: &'a [String],
}

impl Miner<'_> {
    fn leaf(&self, a: usize) -> ProcessTree {
        ProcessTree::Activity(self.names[a].clone())
    }

    fn mine(&self, log: &SubLog) -> ProcessTree {
        let non_empty: SubLog = log
            .iter()
            .filter(|(t, _)| !t.is_empty())
            .map(|(t, n)| (t.clone(), *n))
            .collect();
        if non_empty.is_empty() {
            return ProcessTree::Silent;
        }
        if non_empty.len() < log.len() {
            return ProcessTree::xor(vec![ProcessTree::Silent, self.mine(&non_empty)]);
        }
        let dfg = Dfg::of(log);
        if let [only] = dfg.nodes.as_slice() {
            return if log.keys().all(|t| t.len() == 1) {
                self.leaf(*only)
            } else {
                ProcessTree::looped(self.leaf(*only), ProcessTree::Silent)
            };
        }
        if let Some(groups) = xor_cut(&dfg) {
            let parts = split_xor(log, &groups);
            return ProcessTree::xor(parts.iter().map(|p| self.mine(p)).collect());
        }
        if let Some(groups) = sequence_cut(&dfg) {
            let parts = project(log, &groups);
            return ProcessTree::seq(parts.iter().map(|p| self.mine(p)).collect());
        }
        if let Some(groups) = parallel_cut(&dfg) {
            let parts = project(log, &groups);
            return ProcessTree::par(parts.iter().map(|p| self.mine(p)).collect());
        }
        if let Some(groups) = loop_cut(&dfg) {
            let parts = split_loop(log, &groups);
            let body = self.mine(&parts[0]);
            let redos: Vec<ProcessTree> = parts[1..].iter().map(|p| self.mine(p)).collect();
            let redo = if redos.len() == 1 {
                redos.into_iter().next().expect("one redo")
            } else {
                ProcessTree::xor(redos)
            };
            return ProcessTree::looped(body, redo);
        }
        self.flower(&dfg.nodes)
    }

    fn flower(&self, activities: &[usize]) -> ProcessTree {
        let choice = match activities {
            [only] => self.leaf(*only),
            many => ProcessTree::xor(many.iter().map(|&a| self.leaf(a)).collect()),
        };
        ProcessTree::looped(ProcessTree::Silent, choice)
    }
}

/// Mines a tree from activity sequences.
pub fn discover_from_traces<S: AsRef<str>>(traces: &[Vec<S>]) -> Result<ProcessTree, MiningError> {
    if traces.is_empty() {
        return Err(MiningError::EmptyLog);
    }
    let names: Vec<String> = traces
        .iter()
        .flatten()
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut log = SubLog::new();
    for t in traces {
        let ids = t
            .iter()
            .map(|a| names.binary_search_by(|n| n.as_str().cmp(a.as_ref())).expect("interned"))
            .collect();
        add(&mut log, ids, 1);
    }
    Ok(Miner { names: &names }.mine(&log))
}

pub fn discover_inductive(log: &EventLog) -> Result<ProcessTree, MiningError> {
    let traces: Vec<Vec<String>> = log.traces().into_iter().map(|t| t.activities).collect();
    discover_from_traces(&traces)
}

/// The model accepting any sequence over the given activities.
pub fn flower_model(activities: &[&str]) -> ProcessTree {
    let names: Vec<String> = activities.iter().map(|s| s.to_string()).collect();
    let ids: Vec<usize> = (0..names.len()).collect();
    Miner { names: &names }.flower(&ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::tree::ProcessTree as T;

    fn mine(traces: &[&[&str]]) -> T {
        let owned: Vec<Vec<&str>> = traces.iter().map(|t| t.to_vec()).collect();
        discover_from_traces(&owned).unwrap()
    }

    fn a(l: &str) -> T {
        T::activity(l)
    }

    #[test]
    fn sequence_of_two() {
        assert_eq!(mine(&[&["a", "b"]]), T::seq(vec![a("a"), a("b")]));
    }

    #[test]
    fn sequence_then_parallel() {
        assert_eq!(
            mine(&[&["a", "b", "c"], &["a", "c", "b"]]),
            T::seq(vec![a("a"), T::par(vec![a("b"), a("c")])])
        );
    }

    #[test]
    fn exclusive_choice() {
        assert_eq!(mine(&[&["a"], &["b"]]), T::xor(vec![a("a"), a("b")]));
    }

    #[test]
    fn empty_traces_become_silent_option() {
        assert_eq!(mine(&[&[], &["a"]]), T::xor(vec![T::Silent, a("a")]));
        assert_eq!(mine(&[&[]]), T::Silent);
    }

    #[test]
    fn repeated_single_activity_loops() {
        assert_eq!(mine(&[&["a", "a"], &["a"]]), T::looped(a("a"), T::Silent));
    }

    #[test]
    fn loop_with_redo() {
        assert_eq!(mine(&[&["a", "b", "a"], &["a"]]), T::looped(a("a"), a("b")));
    }

    #[test]
    fn skipped_middle_activity() {
        assert_eq!(
            mine(&[&["a", "b", "c"], &["a", "c"]]),
            T::seq(vec![a("a"), T::xor(vec![T::Silent, a("b")]), a("c")])
        );
    }

    #[test]
    fn empty_log_is_an_error() {
        let none: Vec<Vec<&str>> = Vec::new();
        assert_eq!(discover_from_traces(&none), Err(MiningError::EmptyLog));
    }

    #[test]
    fn trees_are_valid() {
        let t = mine(&[&["a", "b", "c", "d"], &["b", "a", "d", "c", "a"], &["d"], &["c", "a"]]);
        assert!(t.is_valid(), "{t}");
        let mut labels = t.labels();
        labels.sort();
        assert_eq!(labels, ["a", "b", "c", "d"]);
    }
}
