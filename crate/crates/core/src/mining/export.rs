use std::fmt::Write;

use super::petri::{Arc, PetriNet};

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Graphviz rendering. Node order follows place and transition indices.
pub fn petri_to_dot(net: &PetriNet) -> String {
    let mut out = String::from("digraph petri_net {\n  rankdir=LR;\n");
    for (i, p) in net.places.iter().enumerate() {
        let mut label = String::new();
        let (init, fin) = (net.initial_marking[i], net.final_marking[i]);
        if init > 0 {
            label.push_str(&"•".repeat(init as usize));
        }
        if fin > 0 {
            label.push_str(if init > 0 { " ■" } else { "■" });
        }
        let _ = writeln!(out, "  \"{}\" [shape=circle, label=\"{}\"];", dot_escape(&p.name), label);
    }
    for t in &net.transitions {
        match &t.label {
            Some(l) => {
                let _ = writeln!(out, "  \"{}\" [shape=box, label=\"{}\"];", dot_escape(&t.name), dot_escape(l));
            }
            None => {
                let _ = writeln!(
                    out,
                    "  \"{}\" [shape=box, style=filled, fillcolor=black, label=\"\"];",
                    dot_escape(&t.name)
                );
            }
        }
    }
    let mut arcs = net.arcs.clone();
    arcs.sort();
    for arc in arcs {
        let (from, to) = match arc {
            Arc::PlaceToTransition(p, t) => (&net.places[p].name, &net.transitions[t].name),
            Arc::TransitionToPlace(t, p) => (&net.transitions[t].name, &net.places[p].name),
        };
        let _ = writeln!(out, "  \"{}\" -> \"{}\";", dot_escape(from), dot_escape(to));
    }
    out.push_str("}\n");
    out
}

pub fn petri_to_pnml(net: &PetriNet) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n  <net id=\"net\" type=\"http://www.pnml.org/version-2009/grammar/ptnet\">\n    <page id=\"page\">\n");
    for (i, p) in net.places.iter().enumerate() {
        let _ = writeln!(out, "      <place id=\"{}\">", xml_escape(&p.name));
        if net.initial_marking[i] > 0 {
            let _ = writeln!(out, "        <initialMarking><text>{}</text></initialMarking>", net.initial_marking[i]);
        }
        out.push_str("      </place>\n");
    }
    for t in &net.transitions {
        let _ = writeln!(out, "      <transition id=\"{}\">", xml_escape(&t.name));
        match &t.label {
            Some(l) => {
                let _ = writeln!(out, "        <name><text>{}</text></name>", xml_escape(l));
            }
            None => out.push_str("        <toolspecific tool=\"pmax\" version=\"1\" activity=\"$invisible$\"/>\n"),
        }
        out.push_str("      </transition>\n");
    }
    let mut arcs = net.arcs.clone();
    arcs.sort();
    for (i, arc) in arcs.iter().enumerate() {
        let (from, to) = match *arc {
            Arc::PlaceToTransition(p, t) => (&net.places[p].name, &net.transitions[t].name),
            Arc::TransitionToPlace(t, p) => (&net.transitions[t].name, &net.places[p].name),
        };
        let _ = writeln!(
            out,
            "      <arc id=\"a{i}\" source=\"{}\" target=\"{}\"/>",
            xml_escape(from),
            xml_escape(to)
        );
    }
    out.push_str("    </page>\n    <finalmarkings>\n      <marking>\n");
    for (i, p) in net.places.iter().enumerate() {
        if net.final_marking[i] > 0 {
            let _ = writeln!(
                out,
                "        <place idref=\"{}\"><text>{}</text></place>",
                xml_escape(&p.name),
                net.final_marking[i]
            );
        }
    }
    out.push_str("      </marking>\n    </finalmarkings>\n  </net>\n</pnml>\n");
    out
}


#[cfg(test)]
mod tests {
    use super::dot_check::parse;
    use super::*;
    use crate::mining::petri::tree_to_petri;
    use crate::mining::tree::ProcessTree as T;

    fn shapes(dot: &str) -> (usize, usize, usize) {
        let g = parse(dot).unwrap();
        let count = |f: &dyn Fn(&std::collections::BTreeMap<String, String>) -> bool| g.nodes.values().filter(|a| f(a)).count();
        (
            count(&|a| a["shape"] == "circle"),
            count(&|a| a["shape"] == "box"),
            count(&|a| a.get("style").map(String::as_str) == Some("filled")),
        )
    }

    #[test]
    fn single_transition_net() {
        let dot = petri_to_dot(&tree_to_petri(&T::activity("a")));
        assert_eq!(shapes(&dot), (2, 1, 0));
        assert_eq!(parse(&dot).unwrap().edges.len(), 2);
    }

    #[test]
    fn deterministic_output() {
        let tree = T::par(vec![T::activity("a"), T::activity("say \"hi\"")]);
        assert_eq!(petri_to_dot(&tree_to_petri(&tree)), petri_to_dot(&tree_to_petri(&tree)));
    }

    #[test]
    fn silent_transitions_are_filled() {
        let dot = petri_to_dot(&tree_to_petri(&T::par(vec![T::activity("a"), T::activity("b")])));
        assert_eq!(shapes(&dot).2, 2);
    }

    #[test]
    fn labels_are_escaped() {
        let net = tree_to_petri(&T::activity("x\"y\\z"));
        let g = parse(&petri_to_dot(&net)).unwrap();
        assert_eq!(g.nodes["t0"]["label"], "x\"y\\z");
        let pnml = petri_to_pnml(&tree_to_petri(&T::activity("a<b & c")));
        assert!(pnml.contains("a&lt;b &amp; c"));
    }

    #[test]
    fn pnml_lists_every_element() {
        let net = tree_to_petri(&T::seq(vec![T::activity("a"), T::xor(vec![T::activity("b"), T::Silent])]));
        let pnml = petri_to_pnml(&net);
        assert_eq!(pnml.matches("<place id=").count(), net.places.len());
        assert_eq!(pnml.matches("<transition id=").count(), net.transitions.len());
        assert_eq!(pnml.matches("<arc id=").count(), net.arcs.len());
        assert_eq!(pnml.matches("<initialMarking>").count(), 1);
        assert_eq!(pnml.matches("$invisible$").count(), 1);
    }
}
