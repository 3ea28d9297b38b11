use std::collections::{BTreeMap, BTreeSet};

use pmax_core::event_log::EventLog;
use pmax_core::mining::{
    align_trace, compute_dfg, discover_inductive, petri_to_dot, token_replay, tree_to_petri, variants, AlignmentCosts,
    Arc, CaseDiagnostics, PetriNet, ProcessTree as T, DEFAULT_STATE_BUDGET,
};
use pmax_core::par::Parallelism;
use pmax_core::synthetic::{log_from_traces, random_log, random_tree_log};
use proptest::prelude::*;

/// Visible words of the net up to `max_len`, by subset construction over
/// markings reachable through silent transitions.
fn language(net: &PetriNet, max_len: usize) -> BTreeSet<Vec<String>> {
    let n = net.transitions.len();
    let mut pre = vec![Vec::new(); n];
    let mut post = vec![Vec::new(); n];
    for a in &net.arcs {
        match *a {
            Arc::PlaceToTransition(p, t) => pre[t].push(p),
            Arc::TransitionToPlace(t, p) => post[t].push(p),
        }
    }
    let fire = |m: &Vec<u32>, t: usize| -> Option<Vec<u32>> {
        let mut m = m.clone();
        for &p in &pre[t] {
            if m[p] == 0 {
                return None;
            }
            m[p] -= 1;
        }
        for &p in &post[t] {
            m[p] += 1;
        }
        Some(m)
    };
    let closure = |set: BTreeSet<Vec<u32>>| -> BTreeSet<Vec<u32>> {
        let mut out = set.clone();
        let mut stack: Vec<Vec<u32>> = set.into_iter().collect();
        while let Some(m) = stack.pop() {
            for t in 0..n {
                if net.transitions[t].label.is_none() {
                    if let Some(next) = fire(&m, t) {
                        if out.insert(next.clone()) {
                            stack.push(next);
                        }
                    }
                }
            }
        }
        out
    };
    let labels: BTreeSet<String> = net.transitions.iter().filter_map(|t| t.label.clone()).collect();
    let mut words = BTreeSet::new();
    let mut frontier = vec![(Vec::<String>::new(), closure(BTreeSet::from([net.initial_marking.clone()])))];
    while let Some((word, set)) = frontier.pop() {
        if set.contains(&net.final_marking) {
            words.insert(word.clone());
        }
        if word.len() == max_len {
            continue;
        }
        for l in &labels {
            let next: BTreeSet<Vec<u32>> = set
                .iter()
                .flat_map(|m| (0..n).filter(|&t| net.transitions[t].label.as_ref() == Some(l)).filter_map(|t| fire(m, t)))
                .collect();
            if !next.is_empty() {
                let mut w = word.clone();
                w.push(l.clone());
                frontier.push((w, closure(next)));
            }
        }
    }
    words
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            dp[i][j] = if a[i - 1] == b[j - 1] { dp[i - 1][j - 1] + 1 } else { dp[i - 1][j].max(dp[i][j - 1]) };
        }
    }
    dp[a.len()][b.len()]
}

/// Unit-cost optimal alignment by enumerating model words. A word longer
/// than 2|trace| + shortest word can never beat the shortest word.
fn brute_force_cost(net: &PetriNet, trace: &[String]) -> Option<u64> {
    let probe = language(net, 12);
    let shortest = probe.iter().map(Vec::len).min()?;
    let words = language(net, 2 * trace.len() + shortest);
    words
        .iter()
        .map(|w| (trace.len() + w.len() - 2 * lcs(trace, w)) as u64)
        .min()
}

fn all_traces(alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::<String>::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|t| alphabet.iter().map(move |a| [t.clone(), vec![a.to_string()]].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn dfg_identities_hold(log: &EventLog) {
    let dfg = compute_dfg(log);
    let traces = log.traces();
    let non_empty = traces.iter().filter(|t| !t.activities.is_empty()).count();
    assert_eq!(dfg.start_counts.values().sum::<usize>(), non_empty);
    assert_eq!(dfg.end_counts.values().sum::<usize>(), non_empty);
    assert_eq!(dfg.edge_counts.values().sum::<usize>(), log.event_count() - non_empty);
    // Direct pair count.
    let mut pairs: BTreeMap<(String, String), usize> = BTreeMap::new();
    for t in &traces {
        for w in t.activities.windows(2) {
            *pairs.entry((w[0].clone(), w[1].clone())).or_default() += 1;
        }
    }
    assert_eq!(dfg.edge_counts, pairs);
}

fn replay_fitness(log: &EventLog) -> f64 {
    let net = tree_to_petri(&discover_inductive(log).unwrap());
    token_replay(log, &net, Parallelism::Sequential).unwrap().fitness
}

#[test]
fn oracle_language_of_small_nets() {
    let seq = tree_to_petri(&T::seq(vec![T::activity("a"), T::activity("b")]));
    assert_eq!(language(&seq, 5).len(), 1);
    let par = tree_to_petri(&T::par(vec![T::activity("a"), T::activity("b")]));
    assert_eq!(language(&par, 5).len(), 2);
    let lp = tree_to_petri(&T::looped(T::activity("a"), T::Silent));
    assert_eq!(language(&lp, 4).len(), 4);
}

#[test]
fn alignment_matches_enumeration_on_reference_nets() {
    let nets = [
        tree_to_petri(&T::seq(vec![T::activity("a"), T::activity("b"), T::activity("c")])),
        tree_to_petri(&T::par(vec![T::activity("a"), T::activity("b")])),
    ];
    for net in &nets {
        for trace in all_traces(&["a", "b", "c"], 4) {
            let got = align_trace(net, &trace, AlignmentCosts::default(), DEFAULT_STATE_BUDGET).unwrap().cost;
            assert_eq!(got, brute_force_cost(net, &trace), "{trace:?}");
        }
    }
}

#[test]
fn alignment_fitness_example() {
    let net = tree_to_petri(&T::seq(vec![T::activity("a"), T::activity("b"), T::activity("c")]));
    let log = log_from_traces(&[vec!["a", "c"]]);
    let r = pmax_core::mining::align(&log, &net, &Default::default()).unwrap();
    assert!((r.fitness - 0.8).abs() < 1e-12);
}

#[test]
fn replay_example_and_empty_log() {
    let net = tree_to_petri(&T::seq(vec![T::activity("a"), T::activity("b"), T::activity("c")]));
    let r = token_replay(&log_from_traces(&[vec!["a", "c"]]), &net, Parallelism::Sequential).unwrap();
    assert!((r.fitness - 2.0 / 3.0).abs() < 1e-9);
    let empty = log_from_traces::<&str>(&[]);
    let r = token_replay(&empty, &net, Parallelism::Sequential).unwrap();
    assert_eq!((r.fitness, r.per_case.len()), (1.0, 0));
}

#[test]
fn fitness_one_on_arbitrary_logs() {
    for seed in 0..40 {
        let log = random_log(seed, 30, 8);
        assert!((replay_fitness(&log) - 1.0).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let (_, log) = random_tree_log(11, 50, 20);
    let net = tree_to_petri(&discover_inductive(&log).unwrap());
    let a = token_replay(&log, &net, Parallelism::Sequential).unwrap();
    let b = token_replay(&log, &net, Parallelism::Parallel).unwrap();
    assert_eq!(a, b);
    let opts = |p| pmax_core::mining::AlignOptions { parallelism: p, ..Default::default() };
    let a = pmax_core::mining::align(&log, &net, &opts(Parallelism::Sequential)).unwrap();
    let b = pmax_core::mining::align(&log, &net, &opts(Parallelism::Parallel)).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dfg_identities_on_random_logs(seed in any::<u64>()) {
        dfg_identities_hold(&random_log(seed, 50, 20));
        dfg_identities_hold(&random_tree_log(seed, 50, 20).1);
    }

    #[test]
    fn variant_frequencies_sum_to_cases(seed in any::<u64>()) {
        let log = random_log(seed, 50, 20);
        prop_assert_eq!(variants(&log).iter().map(|v| v.frequency).sum::<usize>(), log.case_count());
    }

    #[test]
    fn discovered_model_replays_its_log(seed in any::<u64>()) {
        let (_, log) = random_tree_log(seed, 50, 20);
        prop_assert!((replay_fitness(&log) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn firing_sequences_replay_cleanly(seed in any::<u64>()) {
        let (tree, log) = random_tree_log(seed, 10, 20);
        let net = tree_to_petri(&tree);
        let r = token_replay(&log, &net, Parallelism::Sequential).unwrap();
        for case in &r.per_case {
            match case.diagnostics {
                CaseDiagnostics::Replay(acc) => {
                    prop_assert_eq!((acc.missing, acc.remaining), (0, 0));
                }
                CaseDiagnostics::Alignment(_) => prop_assert!(false),
            }
        }
    }

    #[test]
    fn alignment_matches_enumeration_on_random_trees(seed in any::<u64>(), trace in proptest::collection::vec(0usize..4, 0..=4)) {
        let mut rng = pmax_core::synthetic::rng(seed);
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let tree = pmax_core::synthetic::random_tree(&mut rng, &labels);
        let net = tree_to_petri(&tree);
        prop_assume!(net.transitions.len() <= 6);
        let trace: Vec<String> = trace.into_iter().map(|i| ["a", "b", "c", "x"][i].to_string()).collect();
        let got = align_trace(&net, &trace, AlignmentCosts::default(), DEFAULT_STATE_BUDGET).unwrap().cost;
        prop_assert_eq!(got, brute_force_cost(&net, &trace));
    }

    #[test]
    fn f1_is_harmonic_mean(seed in any::<u64>()) {
        let (_, log) = random_tree_log(seed, 20, 10);
        let net = tree_to_petri(&discover_inductive(&random_log(seed, 5, 5)).unwrap());
        let r = token_replay(&log, &net, Parallelism::Sequential).unwrap();
        let expected = if r.fitness + r.precision > 0.0 { 2.0 * r.fitness * r.precision / (r.fitness + r.precision) } else { 0.0 };
        prop_assert!((r.f1 - expected).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.fitness) && (0.0..=1.0).contains(&r.precision));
    }

    #[test]
    fn dot_is_deterministic(seed in any::<u64>()) {
        let (tree, _) = random_tree_log(seed, 2, 20);
        prop_assert_eq!(petri_to_dot(&tree_to_petri(&tree)), petri_to_dot(&tree_to_petri(&tree.clone())));
    }
}
