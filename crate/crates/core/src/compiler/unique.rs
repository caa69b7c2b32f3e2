use std::collections::HashMap;

use crate::cnf::Var;
use crate::prob::{Node, NodeId, Prob, Theta};

/// Hash-consing tables: structurally equal nodes get the same id.
#[derive(Debug, Default)]
pub struct UniqueTable {
    decision_index: HashMap<(Var, NodeId, NodeId), NodeId>,
    conj_index: HashMap<Vec<NodeId>, NodeId>,
}

impl UniqueTable {
    pub fn decision(&self, var: Var, lo: NodeId, hi: NodeId) -> Option<NodeId> {
        self.decision_index.get(&(var, lo, hi)).copied()
    }

    pub fn conj(&self, children: &[NodeId]) -> Option<NodeId> {
        self.conj_index.get(children).copied()
    }

    pub fn len(&self) -> usize {
        self.decision_index.len() + self.conj_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Append-only arena used by the compiler and by smoothing.
///
/// Children are always created before parents, so arena order is a valid
/// bottom-up order.
pub(crate) struct DiagramBuilder {
    num_vars: u32,
    nodes: Vec<Node>,
    table: UniqueTable,
}

impl DiagramBuilder {
    pub fn new(num_vars: u32) -> Self {
        DiagramBuilder {
            num_vars,
            nodes: vec![Node::False, Node::True],
            table: UniqueTable::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, node: Node) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    /// Canonical decision node. No reduction is applied, so `lo == hi` is kept
    /// (smoothing relies on this for don't-care nodes).
    pub fn decision(&mut self, var: Var, lo: NodeId, hi: NodeId, theta: Option<Theta>) -> NodeId {
        if let Some(id) = self.table.decision(var, lo, hi) {
            return id;
        }
        let id = self.push(Node::Decision { var, lo, hi, theta });
        self.table.decision_index.insert((var, lo, hi), id);
        id
    }

    /// Canonical conjunction over `children`, in the given order.
    ///
    /// Nested conjunctions are spliced in place, true children are dropped,
    /// and zero or one remaining children collapse to `T` or that child.
    /// False children are kept.
    pub fn conj(&mut self, children: impl IntoIterator<Item = NodeId>) -> NodeId {
        let mut flat = Vec::new();
        for c in children {
            match &self.nodes[c.index()] {
                Node::True => {}
                Node::Conj { children } => flat.extend_from_slice(children),
                _ => flat.push(c),
            }
        }
        match flat.len() {
            0 => return NodeId::TRUE,
            1 => return flat[0],
            _ => {}
        }
        if let Some(id) = self.table.conj(&flat) {
            return id;
        }
        let id = self.push(Node::Conj {
            children: flat.clone(),
        });
        self.table.conj_index.insert(flat, id);
        id
    }

    /// Keeps only nodes reachable from `root` (plus terminals), renumbered in
    /// creation order.
    pub fn finish(self, root: NodeId) -> Prob {
        let n = self.nodes.len();
        let mut keep = vec![false; n];
        keep[0] = true;
        keep[1] = true;
        keep[root.index()] = true;
        for i in (0..n).rev() {
            if keep[i] {
                self.nodes[i].for_each_child(|c| keep[c.index()] = true);
            }
        }
        let mut remap = vec![NodeId(u32::MAX); n];
        let mut nodes = Vec::with_capacity(keep.iter().filter(|&&k| k).count());
        for (i, mut node) in self.nodes.into_iter().enumerate() {
            if !keep[i] {
                continue;
            }
            match &mut node {
                Node::False | Node::True => {}
                Node::Decision { lo, hi, .. } => {
                    *lo = remap[lo.index()];
                    *hi = remap[hi.index()];
                }
                Node::Conj { children } => {
                    for c in children.iter_mut() {
                        *c = remap[c.index()];
                    }
                }
            }
            remap[i] = NodeId(nodes.len() as u32);
            nodes.push(node);
        }
        Prob::from_parts_unchecked(self.num_vars, nodes, remap[root.index()])
    }
}
