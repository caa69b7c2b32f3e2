//! CNF formulas, literal weights and assignments.
//!
//! Variables are 1-based as in DIMACS. Weights default to 1 for any literal
//! that is never mentioned.

use std::fmt;
use std::ops::Not;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CnfError {
    #[error("missing `p cnf <vars> <clauses>` header")]
    MissingHeader,
    #[error("line {line}: malformed header `{content}`")]
    MalformedHeader { line: usize, content: String },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {literal} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange {
        line: usize,
        literal: i64,
        num_vars: u32,
    },
    #[error("last clause is not terminated by 0")]
    MissingTerminator,
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("line {line}: malformed weight line `{content}`")]
    MalformedWeightLine { line: usize, content: String },
    #[error("line {line}: weight {weight} for literal {literal} must be finite and non-negative")]
    InvalidWeight {
        line: usize,
        literal: i64,
        weight: f64,
    },
    #[error("variable {var}: W(x) + W(-x) must be positive")]
    ZeroSumWeight { var: u32 },
    #[error("variable index {index} out of range 1..={num_vars}")]
    VariableOutOfRange { index: u32, num_vars: u32 },
    #[error("assignment does not assign every variable")]
    IncompleteAssignment,
    #[error("assignment covers {found} variables, formula has {expected}")]
    AssignmentSizeMismatch { expected: u32, found: u32 },
}

/// A propositional variable, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn new(index: u32) -> Option<Self> {
        (index >= 1).then_some(Var(index))
    }

    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based position, for array indexing.
    #[inline]
    pub fn slot(self) -> usize {
        (self.0 - 1) as usize
    }

    #[inline]
    pub fn from_slot(slot: usize) -> Self {
        Var(slot as u32 + 1)
    }

    pub fn positive(self) -> Lit {
        Lit::new(self, true)
    }

    pub fn negative(self) -> Lit {
        Lit::new(self, false)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    var: Var,
    positive: bool,
}

impl Lit {
    pub fn new(var: Var, positive: bool) -> Self {
        Lit { var, positive }
    }

    pub fn from_dimacs(value: i64) -> Option<Self> {
        let index = u32::try_from(value.unsigned_abs()).ok()?;
        Var::new(index).map(|var| Lit::new(var, value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        let i = i64::from(self.var.0);
        if self.positive {
            i
        } else {
            -i
        }
    }

    #[inline]
    pub fn var(self) -> Var {
        self.var
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.positive
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit::new(self.var, !self.positive)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of literals with duplicates removed.
///
/// The empty clause is representable and makes its formula unsatisfiable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    lits: Vec<Lit>,
}

impl Clause {
    /// Builds a clause, returning `None` when it contains both `x` and `-x`.
    pub fn new(lits: impl IntoIterator<Item = Lit>) -> Option<Self> {
        let mut out: Vec<Lit> = Vec::new();
        for lit in lits {
            if out.contains(&!lit) {
                return None;
            }
            if !out.contains(&lit) {
                out.push(lit);
            }
        }
        Some(Clause { lits: out })
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        for clause in &clauses {
            for lit in clause.lits() {
                if lit.var().index() > num_vars {
                    return Err(CnfError::VariableOutOfRange {
                        index: lit.var().index(),
                        num_vars,
                    });
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    /// Builds a formula from DIMACS-style integer clauses, dropping tautologies.
    pub fn from_dimacs_clauses<I, C>(num_vars: u32, clauses: I) -> Result<Self, CnfError>
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = i64>,
    {
        let mut out = Vec::new();
        for clause in clauses {
            let mut lits = Vec::new();
            for value in clause {
                let lit = Lit::from_dimacs(value).ok_or(CnfError::InvalidToken {
                    line: 0,
                    token: value.to_string(),
                })?;
                lits.push(lit);
            }
            if let Some(c) = Clause::new(lits) {
                out.push(c);
            }
        }
        CnfFormula::new(num_vars, out)
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (1..=self.num_vars).map(Var)
    }

    /// True iff every clause has a literal satisfied by `assignment`.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, CnfError> {
        if assignment.num_vars() != self.num_vars {
            return Err(CnfError::AssignmentSizeMismatch {
                expected: self.num_vars,
                found: assignment.num_vars(),
            });
        }
        if !assignment.is_complete() {
            return Err(CnfError::IncompleteAssignment);
        }
        Ok(self.clauses.iter().all(|clause| {
            clause
                .lits()
                .iter()
                .any(|&lit| assignment.get(lit.var()) == Some(lit.is_positive()))
        }))
    }

    /// Evaluates against a packed assignment where bit `i - 1` holds variable `i`.
    ///
    /// Only meaningful for formulas with at most 64 variables.
    pub fn evaluate_packed(&self, bits: u64) -> bool {
        debug_assert!(self.num_vars <= 64);
        self.clauses.iter().all(|clause| {
            clause
                .lits()
                .iter()
                .any(|&lit| ((bits >> lit.var().slot()) & 1 == 1) == lit.is_positive())
        })
    }

    pub fn parse_dimacs(text: &str) -> Result<Self, CnfError> {
        parse_dimacs(text)
    }

    pub fn render_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause.lits() {
                out.push_str(&lit.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

/// Parses DIMACS CNF. Tautological clauses are dropped and logged.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let mut header: Option<(u32, usize)> = None;
    let mut raw_count = 0usize;
    let mut clauses = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut open = false;
    let mut dropped = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            // SATLIB trailer
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::MalformedHeader {
                    line: line_no,
                    content: trimmed.to_string(),
                });
            }
            header = Some(parse_header(trimmed, line_no)?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(CnfError::MissingHeader);
        };
        for token in trimmed.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| CnfError::InvalidToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                raw_count += 1;
                match Clause::new(current.drain(..)) {
                    Some(c) => clauses.push(c),
                    None => dropped += 1,
                }
                open = false;
                continue;
            }
            if value.unsigned_abs() > u64::from(num_vars) {
                return Err(CnfError::LiteralOutOfRange {
                    line: line_no,
                    literal: value,
                    num_vars,
                });
            }
            // range checked above, so from_dimacs cannot fail
            current.push(Lit::from_dimacs(value).expect("nonzero literal"));
            open = true;
        }
    }

    let Some((num_vars, declared)) = header else {
        return Err(CnfError::MissingHeader);
    };
    if open {
        return Err(CnfError::MissingTerminator);
    }
    if raw_count != declared {
        return Err(CnfError::ClauseCountMismatch {
            declared,
            found: raw_count,
        });
    }
    if dropped > 0 {
        log::info!("dropped {dropped} tautological clause(s)");
    }
    CnfFormula::new(num_vars, clauses)
}

fn parse_header(line: &str, line_no: usize) -> Result<(u32, usize), CnfError> {
    let malformed = || CnfError::MalformedHeader {
        line: line_no,
        content: line.to_string(),
    };
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
        return Err(malformed());
    }
    let vars = parts[2].parse::<u32>().map_err(|_| malformed())?;
    let clauses = parts[3].parse::<usize>().map_err(|_| malformed())?;
    Ok((vars, clauses))
}

/// Literal weights `W(l)`; each variable holds `(W(-x), W(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    weights: Vec<(f64, f64)>,
}

impl WeightFunction {
    pub fn uniform(num_vars: u32) -> Self {
        WeightFunction {
            weights: vec![(1.0, 1.0); num_vars as usize],
        }
    }

    /// Builds from `(W(-x), W(x))` pairs indexed by variable slot.
    pub fn from_pairs(pairs: Vec<(f64, f64)>) -> Result<Self, CnfError> {
        for (slot, &(neg, pos)) in pairs.iter().enumerate() {
            let var = Var::from_slot(slot);
            for (w, lit) in [(neg, var.negative()), (pos, var.positive())] {
                if !w.is_finite() || w < 0.0 {
                    return Err(CnfError::InvalidWeight {
                        line: 0,
                        literal: lit.to_dimacs(),
                        weight: w,
                    });
                }
            }
            if neg + pos <= 0.0 {
                return Err(CnfError::ZeroSumWeight { var: var.index() });
            }
        }
        Ok(WeightFunction { weights: pairs })
    }

    /// Same weight for every positive literal and every negative literal.
    pub fn polarity(num_vars: u32, positive: f64, negative: f64) -> Result<Self, CnfError> {
        Self::from_pairs(vec![(negative, positive); num_vars as usize])
    }

    pub fn num_vars(&self) -> u32 {
        self.weights.len() as u32
    }

    pub fn weight(&self, lit: Lit) -> f64 {
        let (neg, pos) = self.weights[lit.var().slot()];
        if lit.is_positive() {
            pos
        } else {
            neg
        }
    }

    /// `(W(-x), W(x))`.
    pub fn pair(&self, var: Var) -> (f64, f64) {
        self.weights[var.slot()]
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.weights
    }

    pub fn parse(text: &str, formula: &CnfFormula) -> Result<Self, CnfError> {
        parse_weights(text, formula)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (slot, &(neg, pos)) in self.weights.iter().enumerate() {
            let i = slot + 1;
            out.push_str(&format!("w {i} {pos}\nw -{i} {neg}\n"));
        }
        out
    }
}

/// Parses `w <signed-literal> <weight>` lines. `#` starts a comment.
pub fn parse_weights(text: &str, formula: &CnfFormula) -> Result<WeightFunction, CnfError> {
    let num_vars = formula.num_vars();
    let mut weights = vec![(1.0, 1.0); num_vars as usize];
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let malformed = || CnfError::MalformedWeightLine {
            line: line_no,
            content: line.to_string(),
        };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "w" {
            return Err(malformed());
        }
        let literal: i64 = parts[1].parse().map_err(|_| malformed())?;
        let weight: f64 = parts[2].parse().map_err(|_| malformed())?;
        let lit = Lit::from_dimacs(literal).ok_or_else(malformed)?;
        if lit.var().index() > num_vars {
            return Err(CnfError::LiteralOutOfRange {
                line: line_no,
                literal,
                num_vars,
            });
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(CnfError::InvalidWeight {
                line: line_no,
                literal,
                weight,
            });
        }
        let entry = &mut weights[lit.var().slot()];
        if lit.is_positive() {
            entry.1 = weight;
        } else {
            entry.0 = weight;
        }
    }
    for (slot, &(neg, pos)) in weights.iter().enumerate() {
        if neg + pos <= 0.0 {
            return Err(CnfError::ZeroSumWeight {
                var: slot as u32 + 1,
            });
        }
    }
    Ok(WeightFunction { weights })
}

/// A (possibly partial) truth assignment over a fixed number of variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn empty(num_vars: u32) -> Self {
        Assignment {
            values: vec![None; num_vars as usize],
        }
    }

    pub fn from_bools(values: impl IntoIterator<Item = bool>) -> Self {
        Assignment {
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn from_literals(num_vars: u32, lits: impl IntoIterator<Item = Lit>) -> Self {
        let mut a = Assignment::empty(num_vars);
        for lit in lits {
            a.set(lit.var(), lit.is_positive());
        }
        a
    }

    /// Bit `i - 1` of `bits` is the value of variable `i`.
    pub fn from_packed(num_vars: u32, bits: u64) -> Self {
        Self::from_bools((0..num_vars).map(|s| (bits >> s) & 1 == 1))
    }

    pub fn to_packed(&self) -> Option<u64> {
        if self.values.len() > 64 {
            return None;
        }
        let mut bits = 0u64;
        for (slot, v) in self.values.iter().enumerate() {
            match v {
                Some(true) => bits |= 1 << slot,
                Some(false) => {}
                None => return None,
            }
        }
        Some(bits)
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.values.get(var.slot()).copied().flatten()
    }

    pub fn set(&mut self, var: Var, value: bool) {
        self.values[var.slot()] = Some(value);
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn literals(&self) -> impl Iterator<Item = Lit> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(slot, v)| v.map(|b| Lit::new(Var::from_slot(slot), b)))
    }

    /// Product of literal weights over assigned variables.
    pub fn weight(&self, weights: &WeightFunction) -> f64 {
        self.literals().map(|l| weights.weight(l)).product()
    }

    /// DIMACS model line: signed literals by variable index, then `0`.
    pub fn to_dimacs_line(&self) -> String {
        let mut out = String::new();
        for lit in self.literals() {
            out.push_str(&lit.to_dimacs().to_string());
            out.push(' ');
        }
        out.push('0');
        out
    }

    /// Parses a model line produced by [`Assignment::to_dimacs_line`].
    pub fn parse_dimacs_line(num_vars: u32, line: &str) -> Result<Self, CnfError> {
        let mut a = Assignment::empty(num_vars);
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| CnfError::InvalidToken {
                line: 0,
                token: token.to_string(),
            })?;
            if value == 0 {
                break;
            }
            let lit = Lit::from_dimacs(value).ok_or(CnfError::InvalidToken {
                line: 0,
                token: token.to_string(),
            })?;
            if lit.var().index() > num_vars {
                return Err(CnfError::LiteralOutOfRange {
                    line: 0,
                    literal: value,
                    num_vars,
                });
            }
            a.set(lit.var(), lit.is_positive());
        }
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lits(f: &CnfFormula) -> Vec<Vec<i64>> {
        f.clauses()
            .iter()
            .map(|c| c.lits().iter().map(|l| l.to_dimacs()).collect())
            .collect()
    }

    #[test]
    fn parses_running_example() {
        let f = parse_dimacs("p cnf 3 2\n1 2 0\n-1 -3 0\n").unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(lits(&f), vec![vec![1, 2], vec![-1, -3]]);
    }

    #[test]
    fn parses_empty_formula() {
        let f = parse_dimacs("p cnf 1 0\n").unwrap();
        assert_eq!(f.num_vars(), 1);
        assert!(f.clauses().is_empty());
        assert!(f.evaluate(&Assignment::from_bools([false])).unwrap());
    }

    #[test]
    fn drops_tautology() {
        let f = parse_dimacs("p cnf 2 1\n1 -1 0\n").unwrap();
        assert!(f.clauses().is_empty());
    }

    #[test]
    fn comments_multiline_clauses_and_duplicates() {
        let f = parse_dimacs("c hello\np cnf 3 2\n1 1\n 2 0 c\n-3 0\n").unwrap_err();
        // `c` inside a clause line is not a comment
        assert!(matches!(f, CnfError::InvalidToken { .. }));
        let f = parse_dimacs("c hello\np cnf 3 2\n1 1\n 2 0\n-3 0\n").unwrap();
        assert_eq!(lits(&f), vec![vec![1, 2], vec![-3]]);
    }

    #[test]
    fn empty_clause_is_kept() {
        let f = parse_dimacs("p cnf 2 2\n1 2 0\n0\n").unwrap();
        assert!(f.clauses()[1].is_empty());
        assert!(!f.evaluate(&Assignment::from_bools([true, true])).unwrap());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_dimacs("p cnf x 2\n"),
            Err(CnfError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse_dimacs("p dnf 2 1\n1 0\n"),
            Err(CnfError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse_dimacs("1 2 0\n"),
            Err(CnfError::MissingHeader)
        ));
        assert!(matches!(
            parse_dimacs("p cnf 2 1\n1 3 0\n"),
            Err(CnfError::LiteralOutOfRange { literal: 3, .. })
        ));
        assert!(matches!(
            parse_dimacs("p cnf 2 1\n1 2\n"),
            Err(CnfError::MissingTerminator)
        ));
        assert!(matches!(
            parse_dimacs("p cnf 2 3\n1 2 0\n"),
            Err(CnfError::ClauseCountMismatch {
                declared: 3,
                found: 1
            })
        ));
    }

    #[test]
    fn satlib_trailer() {
        let f = parse_dimacs("p cnf 2 1\n1 -2 0\n%\n0\n\n").unwrap();
        assert_eq!(f.clauses().len(), 1);
    }

    #[test]
    fn weights_examples() {
        let f = parse_dimacs("p cnf 2 0\n").unwrap();
        let w = parse_weights("w 1 0.75\nw -1 0.25\n", &f).unwrap();
        let x1 = Var::new(1).unwrap();
        assert_eq!(w.pair(x1), (0.25, 0.75));
        assert_eq!(w.pair(Var::new(2).unwrap()), (1.0, 1.0));

        let w = parse_weights("", &f).unwrap();
        assert_eq!(w, WeightFunction::uniform(2));

        assert_eq!(
            parse_weights("w 2 0\nw -2 0\n", &f),
            Err(CnfError::ZeroSumWeight { var: 2 })
        );
    }

    #[test]
    fn weight_one_polarity_defaults_other() {
        let f = parse_dimacs("p cnf 1 0\n").unwrap();
        let w = parse_weights("# only positive\nw 1 0  # zero\n", &f).unwrap();
        assert_eq!(w.pair(Var::new(1).unwrap()), (1.0, 0.0));
    }

    #[test]
    fn weight_errors() {
        let f = parse_dimacs("p cnf 2 0\n").unwrap();
        assert!(matches!(
            parse_weights("w 1 -0.5\n", &f),
            Err(CnfError::InvalidWeight { .. })
        ));
        assert!(matches!(
            parse_weights("w 3 0.5\n", &f),
            Err(CnfError::LiteralOutOfRange { .. })
        ));
        assert!(matches!(
            parse_weights("w 1\n", &f),
            Err(CnfError::MalformedWeightLine { .. })
        ));
        assert!(matches!(
            parse_weights("w 1 nan\n", &f),
            Err(CnfError::InvalidWeight { .. })
        ));
    }

    #[test]
    fn weights_render_round_trip() {
        let f = parse_dimacs("p cnf 3 0\n").unwrap();
        let w = WeightFunction::from_pairs(vec![(0.1, 3.3), (1e-7, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(parse_weights(&w.render(), &f).unwrap(), w);
    }

    #[test]
    fn evaluate_examples() {
        let f = parse_dimacs("p cnf 3 2\n1 2 0\n-1 -3 0\n").unwrap();
        let tau1 = Assignment::from_bools([true, true, false]);
        let tau2 = Assignment::from_bools([true, true, true]);
        assert!(f.evaluate(&tau1).unwrap());
        assert!(!f.evaluate(&tau2).unwrap());
        let mut partial = Assignment::empty(3);
        partial.set(Var::new(1).unwrap(), true);
        assert_eq!(f.evaluate(&partial), Err(CnfError::IncompleteAssignment));
    }

    #[test]
    fn model_line_format() {
        let a = Assignment::from_bools([true, false, true]);
        assert_eq!(a.to_dimacs_line(), "1 -2 3 0");
        assert_eq!(Assignment::parse_dimacs_line(3, "1 -2 3 0").unwrap(), a);
        assert_eq!(a.to_packed(), Some(0b101));
        assert_eq!(Assignment::from_packed(3, 0b101), a);
    }

    #[test]
    fn negation_flips_polarity_only() {
        let l = Lit::from_dimacs(-4).unwrap();
        assert_eq!((!l).var(), l.var());
        assert!((!l).is_positive());
        assert_eq!(!!l, l);
    }
}
