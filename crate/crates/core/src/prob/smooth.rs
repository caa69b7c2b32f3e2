use crate::cnf::Var;
use crate::compiler::DiagramBuilder;
use crate::varset::VarSet;

use super::{Node, NodeId, Prob};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SmoothStats {
    /// Don't-care decision nodes (both children true) added.
    pub dont_care_created: usize,
    /// Conjunction nodes wrapping a deficient child.
    pub wrappers_created: usize,
}

struct Smoother {
    builder: DiagramBuilder,
    dont_care: Vec<Option<NodeId>>,
    stats: SmoothStats,
}

impl Smoother {
    /// One shared `x ? T : T` node per variable.
    fn dont_care(&mut self, var: Var) -> NodeId {
        if let Some(id) = self.dont_care[var.slot()] {
            return id;
        }
        let before = self.builder_len();
        let id = self.builder.decision(var, NodeId::TRUE, NodeId::TRUE, None);
        if self.builder_len() > before {
            self.stats.dont_care_created += 1;
        }
        self.dont_care[var.slot()] = Some(id);
        id
    }

    fn builder_len(&self) -> usize {
        self.builder.len()
    }

    /// Conjoins `child` with don't-care nodes for every variable in `missing`.
    fn pad(&mut self, child: NodeId, missing: &VarSet) -> NodeId {
        if missing.is_empty() {
            return child;
        }
        let mut children = vec![child];
        for v in missing.iter() {
            children.push(self.dont_care(v));
        }
        let before = self.builder_len();
        let id = self.builder.conj(children);
        if self.builder_len() > before {
            self.stats.wrappers_created += 1;
        }
        id
    }
}

impl Prob {
    /// Returns an equivalent diagram in which both children of every decision
    /// node mention the same variables, and the root mentions every variable.
    ///
    /// Already-smooth input is returned unchanged.
    pub fn smooth(&self) -> Prob {
        self.smooth_with_stats().0
    }

    pub fn smooth_with_stats(&self) -> (Prob, SmoothStats) {
        if self.smooth {
            return (self.clone(), SmoothStats::default());
        }
        let vars = self.var_sets();
        let mut s = Smoother {
            builder: DiagramBuilder::new(self.num_vars),
            dont_care: vec![None; self.num_vars as usize],
            stats: SmoothStats::default(),
        };
        let mut map = vec![NodeId::FALSE; self.nodes.len()];
        map[1] = NodeId::TRUE;
        for (i, node) in self.nodes.iter().enumerate().skip(2) {
            map[i] = match node {
                Node::False | Node::True => unreachable!("terminals live in slots 0 and 1"),
                Node::Decision { var, lo, hi, theta } => {
                    let lo_missing = vars.get(*hi).difference(vars.get(*lo));
                    let hi_missing = vars.get(*lo).difference(vars.get(*hi));
                    let new_lo = s.pad(map[lo.index()], &lo_missing);
                    let new_hi = s.pad(map[hi.index()], &hi_missing);
                    s.builder.decision(*var, new_lo, new_hi, *theta)
                }
                Node::Conj { children } => s.builder.conj(children.iter().map(|c| map[c.index()])),
            };
        }
        let mut root = map[self.root.index()];
        if root != NodeId::FALSE {
            let missing = VarSet::full(self.num_vars).difference(vars.get(self.root));
            root = s.pad(root, &missing);
        }
        let mut out = s.builder.finish(root);
        if !out.parameterized {
            out.clear_parameters();
        }
        (out, s.stats)
    }
}
