use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Sequence,
    Xor,
    Parallel,
    /// Exactly two children: do-part, redo-part.
    Loop,
}

impl Operator {
    fn symbol(self) -> &'static str {
        match self {
            Operator::Sequence => "->",
            Operator::Xor => "X",
            Operator::Parallel => "+",
            Operator::Loop => "*",
        }
    }
}

/// Block-structured process model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessTree {
    Activity(String),
    Silent,
    Node {
        op: Operator,
        children: Vec<ProcessTree>,
    },
}

impl ProcessTree {
    pub fn activity(label: &str) -> Self {
        ProcessTree::Activity(label.to_string())
    }

    pub fn node(op: Operator, children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node { op, children }
    }

    pub fn seq(children: Vec<ProcessTree>) -> Self {
        Self::node(Operator::Sequence, children)
    }

    pub fn xor(children: Vec<ProcessTree>) -> Self {
        Self::node(Operator::Xor, children)
    }

    pub fn par(children: Vec<ProcessTree>) -> Self {
        Self::node(Operator::Parallel, children)
    }

    pub fn looped(body: ProcessTree, redo: ProcessTree) -> Self {
        Self::node(Operator::Loop, vec![body, redo])
    }

    /// Arity rules: operators need two or more children, loops exactly two.
    pub fn is_valid(&self) -> bool {
        match self {
            ProcessTree::Activity(_) | ProcessTree::Silent => true,
            ProcessTree::Node { op, children } => {
                let arity_ok = match op {
                    Operator::Loop => children.len() == 2,
                    _ => children.len() >= 2,
                };
                arity_ok && children.iter().all(ProcessTree::is_valid)
            }
        }
    }

    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ProcessTree::Activity(a) => out.push(a),
            ProcessTree::Silent => {}
            ProcessTree::Node { children, .. } => children.iter().for_each(|c| c.collect_labels(out)),
        }
    }
}

impl fmt::Display for ProcessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessTree::Activity(a) => write!(f, "'{a}'"),
            ProcessTree::Silent => f.write_str("tau"),
            ProcessTree::Node { op, children } => {
                write!(f, "{}(", op.symbol())?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validity_and_rendering() {
        let a = ProcessTree::activity("a");
        let t = ProcessTree::seq(vec![a.clone(), ProcessTree::par(vec![ProcessTree::activity("b"), ProcessTree::Silent])]);
        assert!(t.is_valid());
        assert_eq!(t.to_string(), "->('a', +('b', tau))");
        assert!(!ProcessTree::seq(vec![a.clone()]).is_valid());
        assert!(!ProcessTree::node(Operator::Loop, vec![a.clone(), a.clone(), a]).is_valid());
    }
}
