//! Probabilistic OBDD[∧] diagrams.
//!
//! A [`Prob`] is an arena of nodes stored in bottom-up topological order:
//! every child id is smaller than its parent's id, and ids 0 and 1 are the
//! false and true terminals. Decision nodes carry branch parameters once the
//! diagram has been parameterized from a [`WeightFunction`].

mod annotate;
mod smooth;

use std::fmt;

use thiserror::Error;

use crate::cnf::{Assignment, CnfError, Var, WeightFunction};
use crate::varset::VarSet;

pub use annotate::{
    annotate, annotate_exact, annotate_with, ln_rational, log_sum_exp,
    weighted_model_count, weighted_model_count_exact, AnnotationCache, Domain, ExactParams,
    ExactWeights, LogSpace,
};
pub(crate) use annotate::{eval_node, NodeEval};
pub use smooth::SmoothStats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("diagram has no branch parameters; call parameterize first")]
    Unparameterized,
    #[error("weight function covers {found} variables, diagram has {expected}")]
    WeightArity { expected: u32, found: u32 },
    #[error(transparent)]
    Weights(#[from] CnfError),
    #[error("node {node}: {reason}")]
    Structure { node: usize, reason: String },
}

/// Index into a [`Prob`] arena.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const FALSE: NodeId = NodeId(0);
    pub const TRUE: NodeId = NodeId(1);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Branch parameters of a decision node, with their logarithms cached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theta {
    pub lo: f64,
    pub hi: f64,
    pub ln_lo: f64,
    pub ln_hi: f64,
}

impl Theta {
    pub fn new(lo: f64, hi: f64) -> Self {
        Theta {
            lo,
            hi,
            ln_lo: lo.ln(),
            ln_hi: hi.ln(),
        }
    }

    /// Normalized weights of `-x` and `x`.
    pub fn from_weights(neg: f64, pos: f64) -> Self {
        let total = neg + pos;
        Theta::new(neg / total, pos / total)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    False,
    True,
    Decision {
        var: Var,
        lo: NodeId,
        hi: NodeId,
        theta: Option<Theta>,
    },
    Conj {
        children: Vec<NodeId>,
    },
}

impl Node {
    pub fn decision(var: Var, lo: NodeId, hi: NodeId) -> Self {
        Node::Decision {
            var,
            lo,
            hi,
            theta: None,
        }
    }

    pub fn for_each_child(&self, mut f: impl FnMut(NodeId)) {
        match self {
            Node::False | Node::True => {}
            Node::Decision { lo, hi, .. } => {
                f(*lo);
                f(*hi);
            }
            Node::Conj { children } => children.iter().copied().for_each(f),
        }
    }
}

/// The three structural properties the sampler relies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    Determinism,
    Decomposability,
    Smoothness,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Determinism => "determinism",
            Property::Decomposability => "decomposability",
            Property::Smoothness => "smoothness",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct NodeCounts {
    pub total: usize,
    pub decision: usize,
    pub conj: usize,
    pub terminal: usize,
}

/// `Vars(n)` for every node, indexed by node id.
#[derive(Clone, Debug, PartialEq)]
pub struct VarSetMap {
    sets: Vec<VarSet>,
}

impl VarSetMap {
    pub fn get(&self, id: NodeId) -> &VarSet {
        &self.sets[id.index()]
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prob {
    nodes: Vec<Node>,
    root: NodeId,
    num_vars: u32,
    smooth: bool,
    parameterized: bool,
}

impl Prob {
    /// Builds a diagram from an arena in bottom-up order.
    ///
    /// Only structure is validated (terminal slots, child ids below their
    /// parent, variable range, all-or-none parameters). Determinism,
    /// decomposability and smoothness are left to the checkers so that
    /// violating diagrams can be represented.
    pub fn from_nodes(num_vars: u32, nodes: Vec<Node>, root: NodeId) -> Result<Self, ProbError> {
        let bad = |node: usize, reason: String| ProbError::Structure { node, reason };
        if nodes.len() < 2 || nodes[0] != Node::False || nodes[1] != Node::True {
            return Err(bad(0, "ids 0 and 1 must be the F and T terminals".into()));
        }
        if root.index() >= nodes.len() {
            return Err(bad(root.index(), "root out of range".into()));
        }
        let mut with_theta = 0usize;
        let mut decisions = 0usize;
        for (i, node) in nodes.iter().enumerate().skip(2) {
            match node {
                Node::False | Node::True => {
                    return Err(bad(i, "terminal outside slots 0/1".into()));
                }
                Node::Decision { var, theta, .. } => {
                    if var.index() > num_vars {
                        return Err(bad(i, format!("variable {} out of range", var.index())));
                    }
                    decisions += 1;
                    if theta.is_some() {
                        with_theta += 1;
                    }
                }
                Node::Conj { children } => {
                    if children.is_empty() {
                        return Err(bad(i, "conjunction without children".into()));
                    }
                }
            }
            let mut ok = true;
            node.for_each_child(|c| ok &= c.index() < i);
            if !ok {
                return Err(bad(i, "child id not below parent id".into()));
            }
        }
        if with_theta != 0 && with_theta != decisions {
            return Err(bad(0, "parameters present on only some decision nodes".into()));
        }
        let mut prob = Prob {
            nodes,
            root,
            num_vars,
            smooth: false,
            parameterized: with_theta == decisions,
        };
        prob.smooth = prob.is_ready_for_sampling();
        Ok(prob)
    }

    /// Trusted constructor for arenas built internally; recomputes the
    /// smoothness flag.
    pub(crate) fn from_parts_unchecked(
        num_vars: u32,
        nodes: Vec<Node>,
        root: NodeId,
    ) -> Self {
        let parameterized = nodes
            .iter()
            .all(|n| !matches!(n, Node::Decision { theta: None, .. }));
        let mut prob = Prob {
            nodes,
            root,
            num_vars,
            smooth: false,
            parameterized,
        };
        prob.smooth = prob.is_ready_for_sampling();
        prob
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Smooth and covering every formula variable at the root.
    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn is_parameterized(&self) -> bool {
        self.parameterized
    }

    pub fn counts(&self) -> NodeCounts {
        let mut c = NodeCounts {
            total: self.nodes.len(),
            ..NodeCounts::default()
        };
        for n in &self.nodes {
            match n {
                Node::False | Node::True => c.terminal += 1,
                Node::Decision { .. } => c.decision += 1,
                Node::Conj { .. } => c.conj += 1,
            }
        }
        c
    }

    pub fn var_sets(&self) -> VarSetMap {
        let mut sets: Vec<VarSet> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut s = VarSet::new(self.num_vars);
            match node {
                Node::False | Node::True => {}
                Node::Decision { var, lo, hi, .. } => {
                    s.insert(*var);
                    s.union_with(&sets[lo.index()]);
                    s.union_with(&sets[hi.index()]);
                }
                Node::Conj { children } => {
                    for c in children {
                        s.union_with(&sets[c.index()]);
                    }
                }
            }
            sets.push(s);
        }
        VarSetMap { sets }
    }

    /// First node violating `property`, scanning bottom-up.
    pub fn find_violation(&self, property: Property) -> Option<NodeId> {
        self.find_violation_with(property, &self.var_sets())
    }

    fn find_violation_with(&self, property: Property, vars: &VarSetMap) -> Option<NodeId> {
        self.nodes.iter().enumerate().find_map(|(i, node)| {
            let bad = match (property, node) {
                (Property::Determinism, Node::Decision { var, lo, hi, .. }) => {
                    vars.get(*lo).contains(*var) || vars.get(*hi).contains(*var)
                }
                (Property::Decomposability, Node::Conj { children }) => {
                    let mut seen = VarSet::new(self.num_vars);
                    let mut bad = false;
                    for c in children {
                        let s = vars.get(*c);
                        if !seen.is_disjoint(s) {
                            bad = true;
                            break;
                        }
                        seen.union_with(s);
                    }
                    bad
                }
                (Property::Smoothness, Node::Decision { lo, hi, .. }) => {
                    vars.get(*lo) != vars.get(*hi)
                }
                _ => false,
            };
            bad.then_some(NodeId(i as u32))
        })
    }

    /// Both branches of every decision node fix opposite values of its
    /// variable, i.e. the variable is not decided again below it.
    pub fn check_determinism(&self) -> bool {
        self.find_violation(Property::Determinism).is_none()
    }

    pub fn check_decomposability(&self) -> bool {
        self.find_violation(Property::Decomposability).is_none()
    }

    /// `Vars(lo(n)) = Vars(hi(n))` for every decision node.
    pub fn check_smoothness(&self) -> bool {
        self.find_violation(Property::Smoothness).is_none()
    }

    /// All violations, one entry per property that fails.
    pub fn violations(&self) -> Vec<(Property, NodeId)> {
        let vars = self.var_sets();
        [
            Property::Determinism,
            Property::Decomposability,
            Property::Smoothness,
        ]
        .into_iter()
        .filter_map(|p| self.find_violation_with(p, &vars).map(|n| (p, n)))
        .collect()
    }

    fn is_ready_for_sampling(&self) -> bool {
        let vars = self.var_sets();
        if self.find_violation_with(Property::Smoothness, &vars).is_some() {
            return false;
        }
        self.root == NodeId::FALSE || vars.get(self.root).len() == self.num_vars as usize
    }

    /// Sets branch parameters on every decision node from `weights`.
    ///
    /// Repeatable: this is the whole cost of a weight update.
    pub fn parameterize(&mut self, weights: &WeightFunction) -> Result<(), ProbError> {
        if weights.num_vars() != self.num_vars {
            return Err(ProbError::WeightArity {
                expected: self.num_vars,
                found: weights.num_vars(),
            });
        }
        let thetas: Vec<Theta> = weights
            .pairs()
            .iter()
            .enumerate()
            .map(|(slot, &(neg, pos))| {
                if neg + pos > 0.0 {
                    Ok(Theta::from_weights(neg, pos))
                } else {
                    Err(CnfError::ZeroSumWeight {
                        var: slot as u32 + 1,
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        for node in &mut self.nodes {
            if let Node::Decision { var, theta, .. } = node {
                *theta = Some(thetas[var.slot()]);
            }
        }
        self.parameterized = true;
        Ok(())
    }

    /// Drops branch parameters, leaving the skeleton.
    pub fn clear_parameters(&mut self) {
        let mut any = false;
        for node in &mut self.nodes {
            if let Node::Decision { theta, .. } = node {
                *theta = None;
                any = true;
            }
        }
        self.parameterized = !any;
    }

    /// Traversal semantics: follows `assignment` at decision nodes and every
    /// child of conjunctions; true iff no part reaches the false terminal.
    /// Variables the diagram does not mention are ignored.
    pub fn satisfied_by(&self, assignment: &Assignment) -> bool {
        let mut value = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            value[i] = match node {
                Node::False => false,
                Node::True => true,
                Node::Decision { var, lo, hi, .. } => match assignment.get(*var) {
                    Some(true) => value[hi.index()],
                    Some(false) => value[lo.index()],
                    None => value[lo.index()] && value[hi.index()],
                },
                Node::Conj { children } => children.iter().all(|c| value[c.index()]),
            };
        }
        value[self.root.index()]
    }

    /// Nodes reachable from the root.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        seen[self.root.index()] = true;
        for i in (0..self.nodes.len()).rev() {
            if seen[i] {
                self.nodes[i].for_each_child(|c| seen[c.index()] = true);
            }
        }
        seen
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn v(i: u32) -> Var {
        Var::new(i).unwrap()
    }

    /// The unsmoothed diagram for (x ∨ y) ∧ (¬x ∨ ¬z), x=1, y=2, z=3.
    pub fn fig2() -> Prob {
        let nodes = vec![
            Node::False,
            Node::True,
            Node::decision(v(2), NodeId::FALSE, NodeId::TRUE),
            Node::decision(v(3), NodeId::TRUE, NodeId::FALSE),
            Node::decision(v(1), NodeId(2), NodeId(3)),
        ];
        Prob::from_nodes(3, nodes, NodeId(4)).unwrap()
    }

    /// The smooth 9-node diagram for the same formula.
    pub fn fig1() -> Prob {
        let nodes = vec![
            Node::False,
            Node::True,
            Node::decision(v(2), NodeId::FALSE, NodeId::TRUE),
            Node::decision(v(3), NodeId::TRUE, NodeId::FALSE),
            Node::decision(v(3), NodeId::TRUE, NodeId::TRUE),
            Node::Conj {
                children: vec![NodeId(2), NodeId(4)],
            },
            Node::decision(v(2), NodeId::TRUE, NodeId::TRUE),
            Node::Conj {
                children: vec![NodeId(3), NodeId(6)],
            },
            Node::decision(v(1), NodeId(5), NodeId(7)),
        ];
        Prob::from_nodes(3, nodes, NodeId(8)).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn ids(s: &VarSet) -> Vec<u32> {
        s.iter().map(Var::index).collect()
    }

    #[test]
    fn var_sets_of_figures() {
        let p = fig1();
        let vars = p.var_sets();
        // n4 = don't-care z (id 4), n5 = y decision (id 2), n2 = conj (id 5)
        assert_eq!(ids(vars.get(NodeId(4))), vec![3]);
        assert_eq!(ids(vars.get(NodeId(2))), vec![2]);
        assert_eq!(ids(vars.get(NodeId(5))), vec![2, 3]);
        assert!(vars.get(NodeId::TRUE).is_empty());
        assert_eq!(ids(fig2().var_sets().get(NodeId(4))), vec![1, 2, 3]);
    }

    #[test]
    fn checkers_on_figures() {
        let p = fig1();
        assert!(p.check_determinism() && p.check_decomposability() && p.check_smoothness());
        assert!(p.is_smooth());
        let q = fig2();
        assert!(q.check_determinism() && q.check_decomposability());
        assert!(!q.check_smoothness());
        assert_eq!(q.find_violation(Property::Smoothness), Some(NodeId(4)));
        assert!(!q.is_smooth());
    }

    #[test]
    fn overlapping_conjunction_is_not_decomposable() {
        let nodes = vec![
            Node::False,
            Node::True,
            Node::decision(v(1), NodeId::FALSE, NodeId::TRUE),
            Node::decision(v(2), NodeId::FALSE, NodeId::TRUE),
            Node::decision(v(1), NodeId(3), NodeId::TRUE),
            Node::Conj {
                children: vec![NodeId(2), NodeId(4)],
            },
        ];
        let p = Prob::from_nodes(2, nodes, NodeId(5)).unwrap();
        assert!(!p.check_decomposability());
        assert_eq!(
            p.violations(),
            vec![
                (Property::Decomposability, NodeId(5)),
                (Property::Smoothness, NodeId(4))
            ]
        );
    }

    #[test]
    fn repeated_variable_is_not_deterministic() {
        let nodes = vec![
            Node::False,
            Node::True,
            Node::decision(v(1), NodeId::FALSE, NodeId::TRUE),
            Node::decision(v(1), NodeId(2), NodeId(2)),
        ];
        let p = Prob::from_nodes(1, nodes, NodeId(3)).unwrap();
        assert_eq!(p.find_violation(Property::Determinism), Some(NodeId(3)));
    }

    #[test]
    fn structure_validation() {
        let forward = vec![
            Node::False,
            Node::True,
            Node::decision(v(1), NodeId(3), NodeId::TRUE),
            Node::decision(v(2), NodeId::FALSE, NodeId::TRUE),
        ];
        assert!(Prob::from_nodes(2, forward, NodeId(2)).is_err());
        let out_of_range = vec![
            Node::False,
            Node::True,
            Node::decision(v(5), NodeId::FALSE, NodeId::TRUE),
        ];
        assert!(Prob::from_nodes(2, out_of_range, NodeId(2)).is_err());
        assert!(Prob::from_nodes(1, vec![Node::True, Node::False], NodeId(0)).is_err());
    }

    #[test]
    fn parameterize_examples() {
        let x = v(1);
        let mut p = fig1();
        assert!(!p.is_parameterized());
        let w = WeightFunction::polarity(3, 0.75, 0.25).unwrap();
        p.parameterize(&w).unwrap();
        for node in p.nodes() {
            if let Node::Decision { theta, .. } = node {
                let t = theta.unwrap();
                assert_eq!((t.lo, t.hi), (0.25, 0.75));
            }
        }
        let mut q = fig1();
        q.parameterize(&WeightFunction::polarity(3, 3.0, 1.0).unwrap())
            .unwrap();
        assert_eq!(p, q);

        let mut u = fig1();
        u.parameterize(&WeightFunction::uniform(3)).unwrap();
        let Node::Decision { var, theta, .. } = u.node(u.root()) else {
            panic!()
        };
        assert_eq!(*var, x);
        assert_eq!(theta.unwrap().lo, 0.5);
        assert_eq!(theta.unwrap().hi, 0.5);

        let bad = WeightFunction::uniform(2);
        assert!(matches!(
            u.parameterize(&bad),
            Err(ProbError::WeightArity { .. })
        ));
    }

    #[test]
    fn traversal_semantics() {
        let p = fig1();
        let tau1 = Assignment::from_bools([true, true, false]);
        let tau2 = Assignment::from_bools([true, true, true]);
        assert!(p.satisfied_by(&tau1));
        assert!(!p.satisfied_by(&tau2));
    }

    #[test]
    fn counts() {
        let c = fig1().counts();
        assert_eq!(
            c,
            NodeCounts {
                total: 9,
                decision: 5,
                conj: 2,
                terminal: 2
            }
        );
    }
}
