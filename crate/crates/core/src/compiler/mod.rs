//! CNF to OBDD[∧] compilation.
//!
//! Top-down Shannon expansion on the lowest-ranked variable of the residual
//! formula. Residual clause sets that split into variable-disjoint
//! components become conjunction nodes. Residual formulas are memoized and
//! every node goes through a [`UniqueTable`].

mod format;
mod unique;

use std::collections::HashMap;

use thiserror::Error;

use crate::cnf::{CnfFormula, Lit, Var};
use crate::prob::{NodeId, Prob};

pub use format::{export_prob, import_prob, FormatError};
pub(crate) use unique::DiagramBuilder;
pub use unique::UniqueTable;

pub const DEFAULT_MAX_VARS: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("formula has {num_vars} variables, compilation guard is {max_vars}")]
    TooManyVariables { num_vars: u32, max_vars: u32 },
    #[error("ordering is not a permutation of 1..={num_vars}")]
    InvalidOrdering { num_vars: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OrderingHeuristic {
    Natural,
    /// Most frequently occurring variables first; ties by index.
    #[default]
    OccurrenceDesc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableOrdering {
    order: Vec<Var>,
    rank: Vec<u32>,
}

impl VariableOrdering {
    pub fn new(order: Vec<Var>) -> Result<Self, CompileError> {
        let n = order.len();
        let mut rank = vec![u32::MAX; n];
        for (pos, v) in order.iter().enumerate() {
            let slot = v.slot();
            if slot >= n || rank[slot] != u32::MAX {
                return Err(CompileError::InvalidOrdering { num_vars: n as u32 });
            }
            rank[slot] = pos as u32;
        }
        Ok(VariableOrdering { order, rank })
    }

    pub fn natural(num_vars: u32) -> Self {
        Self::new((1..=num_vars).filter_map(Var::new).collect()).expect("identity permutation")
    }

    pub fn order(&self) -> &[Var] {
        &self.order
    }

    pub fn rank(&self, var: Var) -> u32 {
        self.rank[var.slot()]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

pub fn choose_ordering(formula: &CnfFormula, heuristic: OrderingHeuristic) -> VariableOrdering {
    let n = formula.num_vars();
    match heuristic {
        OrderingHeuristic::Natural => VariableOrdering::natural(n),
        OrderingHeuristic::OccurrenceDesc => {
            let mut counts = vec![0usize; n as usize];
            for clause in formula.clauses() {
                for lit in clause.lits() {
                    counts[lit.var().slot()] += 1;
                }
            }
            let mut order: Vec<Var> = formula.vars().collect();
            order.sort_by_key(|v| (std::cmp::Reverse(counts[v.slot()]), v.index()));
            VariableOrdering::new(order).expect("permutation of formula variables")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    pub max_vars: u32,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_vars: DEFAULT_MAX_VARS,
        }
    }
}

/// Compiles with the default variable guard.
pub fn compile(formula: &CnfFormula, ordering: &VariableOrdering) -> Result<Prob, CompileError> {
    compile_with(formula, ordering, CompileOptions::default())
}

/// Compiles `formula` into an unparameterized, generally non-smooth diagram.
pub fn compile_with(
    formula: &CnfFormula,
    ordering: &VariableOrdering,
    options: CompileOptions,
) -> Result<Prob, CompileError> {
    let num_vars = formula.num_vars();
    if num_vars > options.max_vars {
        return Err(CompileError::TooManyVariables {
            num_vars,
            max_vars: options.max_vars,
        });
    }
    if ordering.len() != num_vars as usize {
        return Err(CompileError::InvalidOrdering { num_vars });
    }
    let clauses: Vec<Clause> = formula
        .clauses()
        .iter()
        .map(|c| {
            let mut lits = c.lits().to_vec();
            lits.sort();
            lits
        })
        .collect();
    let mut c = Compiler {
        ordering,
        builder: DiagramBuilder::new(num_vars),
        memo: HashMap::new(),
        num_vars,
    };
    let root = c.compile(canonical(clauses));
    Ok(c.builder.finish(root))
}

/// A residual clause: literals sorted by variable.
type Clause = Vec<Lit>;

fn canonical(mut clauses: Vec<Clause>) -> Vec<Clause> {
    clauses.sort();
    clauses.dedup();
    clauses
}

struct Compiler<'a> {
    ordering: &'a VariableOrdering,
    builder: DiagramBuilder,
    memo: HashMap<Vec<Clause>, NodeId>,
    num_vars: u32,
}

impl Compiler<'_> {
    fn compile(&mut self, clauses: Vec<Clause>) -> NodeId {
        if clauses.is_empty() {
            return NodeId::TRUE;
        }
        if clauses.iter().any(Vec::is_empty) {
            return NodeId::FALSE;
        }
        if let Some(&id) = self.memo.get(&clauses) {
            return id;
        }
        let components = self.components(&clauses);
        let id = if components.len() > 1 {
            let mut parts = Vec::with_capacity(components.len());
            let mut failed = false;
            for (min_rank, part) in components {
                let child = self.compile(part);
                if child == NodeId::FALSE {
                    failed = true;
                    break;
                }
                parts.push((min_rank, child));
            }
            if failed {
                NodeId::FALSE
            } else {
                parts.sort();
                self.builder.conj(parts.into_iter().map(|(_, c)| c))
            }
        } else {
            self.expand(&clauses)
        };
        self.memo.insert(clauses, id);
        id
    }

    /// Shannon expansion on the lowest-ranked variable present.
    fn expand(&mut self, clauses: &[Clause]) -> NodeId {
        let var = clauses
            .iter()
            .flatten()
            .map(|l| l.var())
            .min_by_key(|&v| self.ordering.rank(v))
            .expect("non-empty clause set");
        let lo = match condition(clauses, var.negative()) {
            Some(cs) => self.compile(cs),
            None => NodeId::FALSE,
        };
        let hi = match condition(clauses, var.positive()) {
            Some(cs) => self.compile(cs),
            None => NodeId::FALSE,
        };
        if lo == hi {
            return lo;
        }
        self.builder.decision(var, lo, hi, None)
    }

    /// Variable-connected components, each tagged with its minimum rank.
    fn components(&self, clauses: &[Clause]) -> Vec<(u32, Vec<Clause>)> {
        let mut parent: Vec<usize> = (0..self.num_vars as usize).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for clause in clauses {
            let first = clause[0].var().slot();
            for lit in &clause[1..] {
                let a = find(&mut parent, first);
                let b = find(&mut parent, lit.var().slot());
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut groups: HashMap<usize, (u32, Vec<Clause>)> = HashMap::new();
        for clause in clauses {
            let r = find(&mut parent, clause[0].var().slot());
            let min = clause
                .iter()
                .map(|l| self.ordering.rank(l.var()))
                .min()
                .expect("non-empty clause");
            let entry = groups.entry(r).or_insert((u32::MAX, Vec::new()));
            entry.0 = entry.0.min(min);
            entry.1.push(clause.clone());
        }
        let mut out: Vec<(u32, Vec<Clause>)> = groups.into_values().collect();
        out.sort_by_key(|(rank, _)| *rank);
        out
    }
}

/// Assigns `lit` true. `None` when some clause is falsified.
fn condition(clauses: &[Clause], lit: Lit) -> Option<Vec<Clause>> {
    let mut out = Vec::with_capacity(clauses.len());
    for clause in clauses {
        if clause.contains(&lit) {
            continue;
        }
        let neg = !lit;
        if clause.contains(&neg) {
            if clause.len() == 1 {
                return None;
            }
            out.push(clause.iter().copied().filter(|&l| l != neg).collect());
        } else {
            out.push(clause.clone());
        }
    }
    Some(canonical(out))
}
