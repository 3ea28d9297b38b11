use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::tree::{Operator, ProcessTree};
use super::MiningError;
use crate::event_log::{ColumnType, Value};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Place {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub name: String,
    /// `None` for silent transitions.
    pub label: Option<String>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arc {
    PlaceToTransition(usize, usize),
    TransitionToPlace(usize, usize),
}

/// Token counts indexed by place.
pub type Marking = Vec<u32>;

/// Places and transitions are referred to by their index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PetriNet {
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    pub arcs: Vec<Arc>,
    pub initial_marking: Marking,
    pub final_marking: Marking,
}

impl Default for PetriNet {
    fn default() -> Self {
        Self::new()
    }
}

impl PetriNet {
    pub fn new() -> Self {
        PetriNet {
            places: Vec::new(),
            transitions: Vec::new(),
            arcs: Vec::new(),
            initial_marking: Vec::new(),
            final_marking: Vec::new(),
        }
    }

    pub fn add_place(&mut self) -> usize {
        let id = self.places.len();
        self.places.push(Place {
            name: format!("p{id}"),
        });
        self.initial_marking.push(0);
        self.final_marking.push(0);
        id
    }

    pub fn add_transition(&mut self, label: Option<&str>) -> usize {
        let id = self.transitions.len();
        self.transitions.push(Transition {
            name: format!("t{id}"),
            label: label.map(str::to_string),
        });
        id
    }

    pub fn arc_in(&mut self, place: usize, transition: usize) {
        self.arcs.push(Arc::PlaceToTransition(place, transition));
    }

    pub fn arc_out(&mut self, transition: usize, place: usize) {
        self.arcs.push(Arc::TransitionToPlace(transition, place));
    }

    pub fn silent_count(&self) -> usize {
        self.transitions.iter().filter(|t| t.is_silent()).count()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.transitions.iter().filter_map(|t| t.label.as_deref()).collect()
    }

    /// Checks the workflow-net shape and returns `(source, sink)`.
    pub fn workflow_places(&self) -> Result<(usize, usize), MiningError> {
        let bad = |m: String| Err(MiningError::NotWorkflowNet(m));
        let mut has_in = vec![false; self.places.len()];
        let mut has_out = vec![false; self.places.len()];
        for arc in &self.arcs {
            match *arc {
                Arc::TransitionToPlace(_, p) => has_in[p] = true,
                Arc::PlaceToTransition(p, _) => has_out[p] = true,
            }
        }
        let sources: Vec<usize> = (0..self.places.len()).filter(|&p| !has_in[p]).collect();
        let sinks: Vec<usize> = (0..self.places.len()).filter(|&p| !has_out[p]).collect();
        let (&[source], &[sink]) = (sources.as_slice(), sinks.as_slice()) else {
            return bad(format!("{} source and {} sink places", sources.len(), sinks.len()));
        };
        let mut expected_initial = vec![0; self.places.len()];
        expected_initial[source] = 1;
        let mut expected_final = vec![0; self.places.len()];
        expected_final[sink] = 1;
        if self.initial_marking != expected_initial || self.final_marking != expected_final {
            return bad("markings must be one token on source and on sink".into());
        }
        // Every node on a source→sink path: forward from source, backward from sink.
        let n_p = self.places.len();
        let node_count = n_p + self.transitions.len();
        let mut fwd = vec![Vec::new(); node_count];
        let mut bwd = vec![Vec::new(); node_count];
        for arc in &self.arcs {
            let (a, b) = match *arc {
                Arc::PlaceToTransition(p, t) => (p, n_p + t),
                Arc::TransitionToPlace(t, p) => (n_p + t, p),
            };
            fwd[a].push(b);
            bwd[b].push(a);
        }
        let reach = |adj: &Vec<Vec<usize>>, from: usize| {
            let mut seen = vec![false; node_count];
            let mut queue = VecDeque::from([from]);
            seen[from] = true;
            while let Some(x) = queue.pop_front() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
            seen
        };
        let f = reach(&fwd, source);
        let b = reach(&bwd, sink);
        if let Some(x) = (0..node_count).find(|&x| !(f[x] && b[x])) {
            let name = if x < n_p {
                self.places[x].name.clone()
            } else {
                self.transitions[x - n_p].name.clone()
            };
            return bad(format!("{name} is not on a path from source to sink"));
        }
        Ok((source, sink))
    }
}

/// Presets and postsets per transition.
#[derive(Debug, Clone)]
pub(crate) struct NetIndex<'a> {
    pub net: &'a PetriNet,
    pub pre: Vec<Vec<usize>>,
    pub post: Vec<Vec<usize>>,
    pub silent: Vec<usize>,
}

impl<'a> NetIndex<'a> {
    pub fn new(net: &'a PetriNet) -> Self {
        let mut pre = vec![Vec::new(); net.transitions.len()];
        let mut post = vec![Vec::new(); net.transitions.len()];
        for arc in &net.arcs {
            match *arc {
                Arc::PlaceToTransition(p, t) => pre[t].push(p),
                Arc::TransitionToPlace(t, p) => post[t].push(p),
            }
        }
        let silent = (0..net.transitions.len())
            .filter(|&t| net.transitions[t].is_silent())
            .collect();
        NetIndex {
            net,
            pre,
            post,
            silent,
        }
    }

    pub fn enabled(&self, marking: &[u32], t: usize) -> bool {
        // Arc multiplicity counts.
        self.pre[t]
            .iter()
            .all(|&p| marking[p] as usize >= self.pre[t].iter().filter(|&&q| q == p).count())
    }

    pub fn fire(&self, marking: &mut [u32], t: usize) {
        for &p in &self.pre[t] {
            marking[p] -= 1;
        }
        for &p in &self.post[t] {
            marking[p] += 1;
        }
    }

    /// Label → transition. Duplicate labels are rejected.
    pub fn label_map(&self) -> Result<HashMap<&'a str, usize>, MiningError> {
        let mut map = HashMap::new();
        for (t, tr) in self.net.transitions.iter().enumerate() {
            if let Some(l) = tr.label.as_deref() {
                if map.insert(l, t).is_some() {
                    return Err(MiningError::DuplicateLabel(l.to_string()));
                }
            }
        }
        Ok(map)
    }
}

/// Compositional translation into a workflow net.
pub fn tree_to_petri(tree: &ProcessTree) -> PetriNet {
    let mut net = PetriNet::new();
    let source = net.add_place();
    let sink = net.add_place();
    translate(&mut net, tree, source, sink);
    net.initial_marking[source] = 1;
    net.final_marking[sink] = 1;
    net
}

fn translate(net: &mut PetriNet, tree: &ProcessTree, input: usize, output: usize) {
    match tree {
        ProcessTree::Activity(a) => {
            let t = net.add_transition(Some(a));
            net.arc_in(input, t);
            net.arc_out(t, output);
        }
        ProcessTree::Silent => {
            let t = net.add_transition(None);
            net.arc_in(input, t);
            net.arc_out(t, output);
        }
        ProcessTree::Node { op, children } => match op {
            Operator::Sequence => {
                let mut from = input;
                for (i, child) in children.iter().enumerate() {
                    let to = if i + 1 == children.len() { output } else { net.add_place() };
                    translate(net, child, from, to);
                    from = to;
                }
            }
            Operator::Xor => {
                for child in children {
                    translate(net, child, input, output);
                }
            }
            Operator::Parallel => {
                let fork = net.add_transition(None);
                let join = net.add_transition(None);
                net.arc_in(input, fork);
                net.arc_out(join, output);
                for child in children {
                    let (s, e) = (net.add_place(), net.add_place());
                    net.arc_out(fork, s);
                    net.arc_in(e, join);
                    translate(net, child, s, e);
                }
            }
            Operator::Loop => {
                // Entry and exit keep the redo arc away from shared places.
                let (start, mid) = (net.add_place(), net.add_place());
                let enter = net.add_transition(None);
                net.arc_in(input, enter);
                net.arc_out(enter, start);
                translate(net, &children[0], start, mid);
                translate(net, &children[1], mid, start);
                let exit = net.add_transition(None);
                net.arc_in(mid, exit);
                net.arc_out(exit, output);
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub places: usize,
    pub transitions: usize,
    pub arcs: usize,
    pub silent_transitions: usize,
    pub labeled_transitions: Vec<String>,
}

pub fn model_summary(net: &PetriNet) -> ModelSummary {
    let mut labels: Vec<String> = net.labels().into_iter().map(str::to_string).collect();
    labels.sort();
    ModelSummary {
        places: net.places.len(),
        transitions: net.transitions.len(),
        arcs: net.arcs.len(),
        silent_transitions: net.silent_count(),
        labeled_transitions: labels,
    }
}

impl ModelSummary {
    pub fn to_table(&self) -> Table {
        let mut t = Table::with_columns(&[("property", ColumnType::String), ("value", ColumnType::String)]);
        for (k, v) in [
            ("places", self.places.to_string()),
            ("transitions", self.transitions.to_string()),
            ("arcs", self.arcs.to_string()),
            ("silent_transitions", self.silent_transitions.to_string()),
            ("labeled_transitions", self.labeled_transitions.join(", ")),
        ] {
            t.push(vec![Value::from(k), Value::from(v)]);
        }
        t
    }

    pub fn to_text(&self) -> String {
        format!(
            "Petri net: {} places, {} transitions ({} silent), {} arcs; activities: [{}]",
            self.places,
            self.transitions,
            self.silent_transitions,
            self.arcs,
            self.labeled_transitions.join(", ")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::tree::ProcessTree as T;

    #[test]
    fn single_activity_net() {
        let net = tree_to_petri(&T::activity("a"));
        assert_eq!((net.places.len(), net.transitions.len()), (2, 1));
        assert_eq!(net.workflow_places().unwrap(), (0, 1));
    }

    #[test]
    fn sequence_is_a_chain() {
        let net = tree_to_petri(&T::seq(vec![T::activity("a"), T::activity("b")]));
        let s = model_summary(&net);
        assert_eq!((s.places, s.transitions, s.silent_transitions), (3, 2, 0));
        assert_eq!(s.arcs, 4);
        net.workflow_places().unwrap();
    }

    #[test]
    fn parallel_uses_fork_and_join() {
        let net = tree_to_petri(&T::par(vec![T::activity("a"), T::activity("b")]));
        assert_eq!(model_summary(&net).silent_transitions, 2);
        let idx = NetIndex::new(&net);
        assert_eq!(net.transitions[2].label.as_deref(), Some("a"));
        assert_eq!(net.transitions[3].label.as_deref(), Some("b"));
        // Disjoint branches.
        assert!(idx.pre[2].iter().all(|p| !idx.pre[3].contains(p)));
        assert!(idx.post[2].iter().all(|p| !idx.post[3].contains(p)));
        net.workflow_places().unwrap();
    }

    #[test]
    fn silent_only_net_has_no_labels() {
        let net = tree_to_petri(&T::Silent);
        assert!(model_summary(&net).labeled_transitions.is_empty());
    }

    #[test]
    fn loops_keep_workflow_shape() {
        let tree = T::xor(vec![
            T::looped(T::activity("a"), T::activity("b")),
            T::looped(T::Silent, T::xor(vec![T::activity("c"), T::activity("d")])),
        ]);
        tree_to_petri(&tree).workflow_places().unwrap();
    }

    #[test]
    fn workflow_check_rejects_two_sources() {
        let mut net = PetriNet::new();
        let (p, q, r) = (net.add_place(), net.add_place(), net.add_place());
        let t = net.add_transition(Some("a"));
        net.arc_in(p, t);
        net.arc_in(q, t);
        net.arc_out(t, r);
        net.initial_marking[p] = 1;
        net.final_marking[r] = 1;
        assert!(matches!(net.workflow_places(), Err(MiningError::NotWorkflowNet(_))));
    }
}
