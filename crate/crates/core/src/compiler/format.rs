//! Line-oriented PROB text format.
//!
//! ```text
//! prob 1.0
//! nvars <n>
//! nnodes <m>
//! 0 F
//! 1 T
//! <id> D <var> <lo-id> <hi-id> [<theta_lo> <theta_hi>]
//! <id> A <k> <child-id>...
//! root <id>
//! ```
//!
//! `#` starts a comment. Ids in files we write are bottom-up; files with
//! forward references are accepted and renumbered if acyclic.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cnf::Var;
use crate::prob::{Node, NodeId, Prob, ProbError, Property, Theta};

const THETA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unsupported format version `{0}`")]
    Version(String),
    #[error("header declares {declared} nodes, found {found}")]
    NodeCount { declared: usize, found: usize },
    #[error("node id {0} is defined more than once")]
    DuplicateId(usize),
    #[error("node ids must be dense 0..{count}; id {missing} is missing")]
    MissingId { count: usize, missing: usize },
    #[error("node 0 must be F and node 1 must be T")]
    Terminals,
    #[error("node {node} references undefined node {child}")]
    DanglingReference { node: usize, child: usize },
    #[error("cycle through node {node}")]
    Cycle { node: usize },
    #[error("node {node}: variable {var} outside 1..={num_vars}")]
    VariableOutOfRange { node: usize, var: u32, num_vars: u32 },
    #[error("node {node}: conjunction needs at least one child")]
    EmptyConjunction { node: usize },
    #[error("node {node}: branch parameters must lie in [0, 1] and sum to 1")]
    InvalidTheta { node: usize },
    #[error("branch parameters present on some decision nodes only")]
    PartialParameters,
    #[error("missing `root` line")]
    MissingRoot,
    #[error("{property} violated at node {node}")]
    PropertyViolation { property: Property, node: usize },
    #[error(transparent)]
    Structure(#[from] ProbError),
}

pub fn export_prob(prob: &Prob) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "prob 1.0");
    let _ = writeln!(out, "nvars {}", prob.num_vars());
    let _ = writeln!(out, "nnodes {}", prob.len());
    let with_theta = prob.is_parameterized();
    for (i, node) in prob.nodes().iter().enumerate() {
        match node {
            Node::False => {
                let _ = writeln!(out, "{i} F");
            }
            Node::True => {
                let _ = writeln!(out, "{i} T");
            }
            Node::Decision { var, lo, hi, theta } => {
                let _ = write!(out, "{i} D {} {lo} {hi}", var.index());
                if let (true, Some(t)) = (with_theta, theta) {
                    let _ = write!(out, " {:?} {:?}", t.lo, t.hi);
                }
                out.push('\n');
            }
            Node::Conj { children } => {
                let _ = write!(out, "{i} A {}", children.len());
                for c in children {
                    let _ = write!(out, " {c}");
                }
                out.push('\n');
            }
        }
    }
    let _ = writeln!(out, "root {}", prob.root());
    out
}

enum RawNode {
    False,
    True,
    Decision {
        var: u32,
        lo: usize,
        hi: usize,
        theta: Option<(f64, f64)>,
    },
    Conj(Vec<usize>),
}

impl RawNode {
    fn children(&self) -> Vec<usize> {
        match self {
            RawNode::False | RawNode::True => Vec::new(),
            RawNode::Decision { lo, hi, .. } => vec![*lo, *hi],
            RawNode::Conj(c) => c.clone(),
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, FormatError> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| syntax(line, format!("expected {what}")))
}

/// Parses and validates a PROB file.
///
/// Rejects dangling references, cycles, and diagrams that are not
/// deterministic or not decomposable. Smoothness is recorded, not required.
pub fn import_prob(text: &str) -> Result<Prob, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, first) = lines.next().ok_or_else(|| syntax(1, "empty input"))?;
    let mut it = first.split_whitespace();
    if it.next() != Some("prob") {
        return Err(syntax(ln, "expected `prob <version>`"));
    }
    match it.next() {
        Some("1.0") => {}
        Some(v) => return Err(FormatError::Version(v.to_string())),
        None => return Err(syntax(ln, "missing version")),
    }

    let mut header = |key: &str| -> Result<usize, FormatError> {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| syntax(0, format!("missing `{key}`")))?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(syntax(ln, format!("expected `{key} <n>`")));
        }
        num(it.next(), ln, "count")
    };
    let num_vars = u32::try_from(header("nvars")?).map_err(|_| syntax(0, "nvars too large"))?;
    let declared = header("nnodes")?;

    let mut slots: Vec<Option<RawNode>> = (0..declared).map(|_| None).collect();
    let mut found = 0usize;
    let mut root: Option<usize> = None;
    for (ln, l) in lines {
        let mut it = l.split_whitespace();
        let head = it.next().expect("non-empty line");
        if head == "root" {
            root = Some(num(it.next(), ln, "root id")?);
            continue;
        }
        if root.is_some() {
            return Err(syntax(ln, "content after `root`"));
        }
        let id: usize = head.parse().map_err(|_| syntax(ln, "expected node id"))?;
        let raw = match it.next() {
            Some("F") => RawNode::False,
            Some("T") => RawNode::True,
            Some("D") => {
                let var = num(it.next(), ln, "variable")?;
                let lo = num(it.next(), ln, "lo id")?;
                let hi = num(it.next(), ln, "hi id")?;
                let theta = match it.next() {
                    None => None,
                    Some(t) => {
                        let tl: f64 = t.parse().map_err(|_| syntax(ln, "expected theta_lo"))?;
                        let th: f64 = num(it.next(), ln, "theta_hi")?;
                        Some((tl, th))
                    }
                };
                RawNode::Decision { var, lo, hi, theta }
            }
            Some("A") => {
                let k: usize = num(it.next(), ln, "child count")?;
                let mut children = Vec::with_capacity(k);
                for _ in 0..k {
                    children.push(num(it.next(), ln, "child id")?);
                }
                if k == 0 {
                    return Err(FormatError::EmptyConjunction { node: id });
                }
                RawNode::Conj(children)
            }
            _ => return Err(syntax(ln, "expected node kind F, T, D or A")),
        };
        if it.next().is_some() {
            return Err(syntax(ln, "trailing tokens"));
        }
        found += 1;
        if id >= declared {
            return Err(FormatError::NodeCount { declared, found });
        }
        if slots[id].is_some() {
            return Err(FormatError::DuplicateId(id));
        }
        slots[id] = Some(raw);
    }
    if found != declared {
        return Err(FormatError::NodeCount { declared, found });
    }
    let raw: Vec<RawNode> = slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or(FormatError::MissingId {
                count: declared,
                missing: i,
            })
        })
        .collect::<Result<_, _>>()?;
    let root = root.ok_or(FormatError::MissingRoot)?;
    if root >= raw.len() {
        return Err(FormatError::DanglingReference {
            node: root,
            child: root,
        });
    }
    if raw.len() < 2 || !matches!(raw[0], RawNode::False) || !matches!(raw[1], RawNode::True) {
        return Err(FormatError::Terminals);
    }
    for (i, node) in raw.iter().enumerate() {
        if i >= 2 && matches!(node, RawNode::False | RawNode::True) {
            return Err(FormatError::Terminals);
        }
        for c in node.children() {
            if c >= raw.len() {
                return Err(FormatError::DanglingReference { node: i, child: c });
            }
        }
        if let RawNode::Decision { var, theta, .. } = node {
            if *var == 0 || *var > num_vars {
                return Err(FormatError::VariableOutOfRange {
                    node: i,
                    var: *var,
                    num_vars,
                });
            }
            if let Some((lo, hi)) = theta {
                let ok = (0.0..=1.0).contains(lo)
                    && (0.0..=1.0).contains(hi)
                    && (lo + hi - 1.0).abs() <= THETA_TOLERANCE;
                if !ok {
                    return Err(FormatError::InvalidTheta { node: i });
                }
            }
        }
    }
    let decisions = raw
        .iter()
        .filter(|n| matches!(n, RawNode::Decision { .. }))
        .count();
    let with_theta = raw
        .iter()
        .filter(|n| matches!(n, RawNode::Decision { theta: Some(_), .. }))
        .count();
    if with_theta != 0 && with_theta != decisions {
        return Err(FormatError::PartialParameters);
    }

    let order = topological_order(&raw)?;
    let mut new_id = vec![0u32; raw.len()];
    for (pos, &old) in order.iter().enumerate() {
        new_id[old] = pos as u32;
    }
    let nodes: Vec<Node> = order
        .iter()
        .map(|&old| match &raw[old] {
            RawNode::False => Node::False,
            RawNode::True => Node::True,
            RawNode::Decision { var, lo, hi, theta } => Node::Decision {
                var: Var::new(*var).expect("range checked"),
                lo: NodeId(new_id[*lo]),
                hi: NodeId(new_id[*hi]),
                theta: theta.map(|(l, h)| Theta::new(l, h)),
            },
            RawNode::Conj(children) => Node::Conj {
                children: children.iter().map(|&c| NodeId(new_id[c])).collect(),
            },
        })
        .collect();
    let prob = Prob::from_nodes(num_vars, nodes, NodeId(new_id[root]))?;
    for property in [Property::Determinism, Property::Decomposability] {
        if let Some(n) = prob.find_violation(property) {
            return Err(FormatError::PropertyViolation {
                property,
                node: order[n.index()],
            });
        }
    }
    Ok(prob)
}

/// Bottom-up order keeping terminals at 0 and 1 and otherwise preferring
/// file order; identity for files that are already bottom-up.
fn topological_order(raw: &[RawNode]) -> Result<Vec<usize>, FormatError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; raw.len()];
    let mut order = Vec::with_capacity(raw.len());
    for start in 0..raw.len() {
        if mark[start] != Mark::New {
            continue;
        }
        // iterative DFS: (node, next child index)
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Active;
        while let Some(top) = stack.len().checked_sub(1) {
            let (node, next) = stack[top];
            let children = raw[node].children();
            if next < children.len() {
                let c = children[next];
                stack[top].1 += 1;
                match mark[c] {
                    Mark::New => {
                        mark[c] = Mark::Active;
                        stack.push((c, 0));
                    }
                    Mark::Active => return Err(FormatError::Cycle { node: c }),
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                order.push(node);
                stack.pop();
            }
        }
    }
    Ok(order)
}
