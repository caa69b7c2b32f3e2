//! Bottom-up joint-probability annotation.
//!
//! Conjunctions multiply their children; decision nodes mix their branches
//! by the branch parameters. The false terminal has probability zero, so
//! edges into it drop out of every sum. Arithmetic is pluggable through
//! [`Domain`]: [`LogSpace`] is the fast path, [`ExactParams`] and
//! [`ExactWeights`] use arbitrary-precision rationals.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cnf::{Var, WeightFunction};

use super::{Node, NodeId, Prob, ProbError, Theta};

/// `ln(e^a + e^b)` without leaving log space.
///
/// `-inf` encodes probability zero and is absorbed exactly.
#[inline]
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Arithmetic used for annotation.
pub trait Domain: Sync {
    type Value: Clone + Send + Sync + fmt::Debug + PartialEq;

    fn zero(&self) -> Self::Value;
    fn one(&self) -> Self::Value;
    fn is_zero(&self, v: &Self::Value) -> bool;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    /// `(θ_lo, θ_hi)` of a decision node; `None` when unavailable.
    fn branch(&self, var: Var, theta: Option<&Theta>) -> Option<(Self::Value, Self::Value)>;
    /// `hi / joint` as a probability.
    fn hi_fraction(&self, hi: &Self::Value, joint: &Self::Value) -> f64;
    fn ln(&self, v: &Self::Value) -> f64;
}

/// Log probabilities in `f64`; uses the cached `ln θ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LogSpace;

impl Domain for LogSpace {
    type Value = f64;

    #[inline]
    fn zero(&self) -> f64 {
        f64::NEG_INFINITY
    }
    #[inline]
    fn one(&self) -> f64 {
        0.0
    }
    #[inline]
    fn is_zero(&self, v: &f64) -> bool {
        *v == f64::NEG_INFINITY
    }
    #[inline]
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    #[inline]
    fn add(&self, a: &f64, b: &f64) -> f64 {
        log_sum_exp(*a, *b)
    }
    #[inline]
    fn branch(&self, _var: Var, theta: Option<&Theta>) -> Option<(f64, f64)> {
        theta.map(|t| (t.ln_lo, t.ln_hi))
    }
    #[inline]
    fn hi_fraction(&self, hi: &f64, joint: &f64) -> f64 {
        (hi - joint).exp().min(1.0)
    }
    fn ln(&self, v: &f64) -> f64 {
        *v
    }
}

/// Exact rationals built from the stored `f64` parameters.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactParams;

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite parameter")
}

fn rational_ops_hi_fraction(hi: &BigRational, joint: &BigRational) -> f64 {
    (hi / joint).to_f64().unwrap_or(0.0).clamp(0.0, 1.0)
}

impl Domain for ExactParams {
    type Value = BigRational;

    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn is_zero(&self, v: &BigRational) -> bool {
        v.is_zero()
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn branch(&self, _var: Var, theta: Option<&Theta>) -> Option<(BigRational, BigRational)> {
        theta.map(|t| (rational(t.lo), rational(t.hi)))
    }
    fn hi_fraction(&self, hi: &BigRational, joint: &BigRational) -> f64 {
        rational_ops_hi_fraction(hi, joint)
    }
    fn ln(&self, v: &BigRational) -> f64 {
        ln_rational(v)
    }
}

/// Exact rationals with parameters derived directly from a weight function,
/// independent of any stored parameters.
#[derive(Clone, Debug)]
pub struct ExactWeights {
    thetas: Vec<(BigRational, BigRational)>,
    sums: Vec<BigRational>,
}

impl ExactWeights {
    pub fn new(weights: &WeightFunction) -> Self {
        let mut thetas = Vec::with_capacity(weights.pairs().len());
        let mut sums = Vec::with_capacity(weights.pairs().len());
        for &(neg, pos) in weights.pairs() {
            let (n, p) = (rational(neg), rational(pos));
            let total = &n + &p;
            thetas.push((&n / &total, &p / &total));
            sums.push(total);
        }
        ExactWeights { thetas, sums }
    }
}

impl Domain for ExactWeights {
    type Value = BigRational;

    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn is_zero(&self, v: &BigRational) -> bool {
        v.is_zero()
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn branch(&self, var: Var, _theta: Option<&Theta>) -> Option<(BigRational, BigRational)> {
        self.thetas.get(var.slot()).cloned()
    }
    fn hi_fraction(&self, hi: &BigRational, joint: &BigRational) -> f64 {
        rational_ops_hi_fraction(hi, joint)
    }
    fn ln(&self, v: &BigRational) -> f64 {
        ln_rational(v)
    }
}

fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().expect("64-bit value").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a non-negative rational; `-inf` for zero.
pub fn ln_rational(v: &BigRational) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    debug_assert!(v.is_positive());
    ln_bigint(v.numer()) - ln_bigint(v.denom())
}

/// Result of evaluating one node from its children's values.
pub(crate) enum NodeEval<V> {
    Value(V),
    /// Weighted hi-branch value and the sum over both branches.
    Decision { hi: V, joint: V },
}

impl<V> NodeEval<V> {
    pub(crate) fn into_value(self) -> V {
        match self {
            NodeEval::Value(v) => v,
            NodeEval::Decision { joint, .. } => joint,
        }
    }
}

/// Evaluates one node. Shared by [`annotate_with`] and the sampler so both
/// produce identical values.
#[inline]
pub(crate) fn eval_node<D: Domain>(
    domain: &D,
    node: &Node,
    values: &[D::Value],
) -> Result<NodeEval<D::Value>, ProbError> {
    Ok(match node {
        Node::False => NodeEval::Value(domain.zero()),
        Node::True => NodeEval::Value(domain.one()),
        Node::Conj { children } => {
            let mut acc = domain.one();
            for c in children {
                let v = &values[c.index()];
                if domain.is_zero(v) {
                    return Ok(NodeEval::Value(domain.zero()));
                }
                acc = domain.mul(&acc, v);
            }
            NodeEval::Value(acc)
        }
        Node::Decision { var, lo, hi, theta } => {
            let (t_lo, t_hi) = domain
                .branch(*var, theta.as_ref())
                .ok_or(ProbError::Unparameterized)?;
            let lo = domain.mul(&t_lo, &values[lo.index()]);
            let hi = domain.mul(&t_hi, &values[hi.index()]);
            let joint = domain.add(&lo, &hi);
            NodeEval::Decision { hi, joint }
        }
    })
}

/// Joint probability of every node under `domain`, indexed by node id.
pub fn annotate_with<D: Domain>(prob: &Prob, domain: &D) -> Result<Vec<D::Value>, ProbError> {
    let mut values = Vec::with_capacity(prob.len());
    for node in prob.nodes() {
        let v = eval_node(domain, node, &values)?.into_value();
        values.push(v);
    }
    Ok(values)
}

/// Per-node log joint probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationCache {
    log_prob: Vec<f64>,
    root: NodeId,
}

impl AnnotationCache {
    pub(crate) fn new(log_prob: Vec<f64>, root: NodeId) -> Self {
        AnnotationCache { log_prob, root }
    }

    pub fn get(&self, id: NodeId) -> f64 {
        self.log_prob[id.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.log_prob
    }

    /// `ln` of the probability mass of satisfying assignments.
    pub fn root_log_prob(&self) -> f64 {
        self.log_prob[self.root.index()]
    }

    /// Nodes with probability zero (including the false terminal).
    pub fn is_excluded(&self, id: NodeId) -> bool {
        self.log_prob[id.index()] == f64::NEG_INFINITY
    }
}

/// Log-space annotation of a parameterized diagram.
pub fn annotate(prob: &Prob) -> Result<AnnotationCache, ProbError> {
    if !prob.is_parameterized() {
        return Err(ProbError::Unparameterized);
    }
    Ok(AnnotationCache::new(
        annotate_with(prob, &LogSpace)?,
        prob.root(),
    ))
}

/// Exact annotation over the stored parameters.
pub fn annotate_exact(prob: &Prob) -> Result<Vec<BigRational>, ProbError> {
    if !prob.is_parameterized() {
        return Err(ProbError::Unparameterized);
    }
    annotate_with(prob, &ExactParams)
}

fn check_arity(prob: &Prob, weights: &WeightFunction) -> Result<(), ProbError> {
    if weights.num_vars() != prob.num_vars() {
        return Err(ProbError::WeightArity {
            expected: prob.num_vars(),
            found: weights.num_vars(),
        });
    }
    Ok(())
}

/// `N = Σ_models Π W(l)`, recovered as `P(root) · Π_x (W(x) + W(-x))`.
///
/// Parameterizes a copy of the diagram with `weights`; stored parameters are
/// ignored.
pub fn weighted_model_count(prob: &Prob, weights: &WeightFunction) -> Result<f64, ProbError> {
    check_arity(prob, weights)?;
    let mut own = prob.clone();
    own.parameterize(weights)?;
    let root = annotate(&own)?.root_log_prob();
    let scale: f64 = weights.pairs().iter().map(|(n, p)| (n + p).ln()).sum();
    Ok((root + scale).exp())
}

/// Exact weighted model count with parameters taken directly from `weights`.
pub fn weighted_model_count_exact(
    prob: &Prob,
    weights: &WeightFunction,
) -> Result<BigRational, ProbError> {
    check_arity(prob, weights)?;
    let domain = ExactWeights::new(weights);
    let values = annotate_with(prob, &domain)?;
    let mut n = values[prob.root().index()].clone();
    for s in &domain.sums {
        n *= s;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn log_sum_exp_examples() {
        assert_eq!(log_sum_exp(0.25f64.ln() + 0.0, f64::NEG_INFINITY), 0.25f64.ln());
        assert_eq!(log_sum_exp(0.5f64.ln(), 0.5f64.ln()), 0.0);
        // -1000 + ln(1 + e^-1)
        let expected = -999.686_738_312_481_8;
        let got = log_sum_exp(-1000.0, -1001.0);
        assert!(got.is_finite());
        assert!((got - expected).abs() < 1e-12, "{got}");
        assert_eq!(
            log_sum_exp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn fig1_annotation() {
        let mut p = fig1();
        p.parameterize(&WeightFunction::uniform(3)).unwrap();
        let a = annotate(&p).unwrap();
        assert!((a.root_log_prob().exp() - 0.5).abs() < 1e-15);
        assert!(a.is_excluded(NodeId::FALSE));

        p.parameterize(&WeightFunction::polarity(3, 0.75, 0.25).unwrap())
            .unwrap();
        let a = annotate(&p).unwrap();
        assert!((a.root_log_prob().exp() - 0.375).abs() < 1e-15);
        let exact = annotate_exact(&p).unwrap();
        assert_eq!(
            exact[p.root().index()],
            BigRational::new(BigInt::from(3), BigInt::from(8))
        );
    }

    #[test]
    fn single_free_decision_has_unit_mass() {
        for (neg, pos) in [(1.0, 1.0), (0.0, 1.0), (1.0, 0.0), (0.3, 7.0)] {
            let mut p = Prob::from_nodes(
                1,
                vec![
                    Node::False,
                    Node::True,
                    Node::decision(v(1), NodeId::TRUE, NodeId::TRUE),
                ],
                NodeId(2),
            )
            .unwrap();
            p.parameterize(&WeightFunction::from_pairs(vec![(neg, pos)]).unwrap())
                .unwrap();
            let q = annotate(&p).unwrap().root_log_prob();
            assert!(q.abs() < 1e-15, "{q}");
        }
    }

    #[test]
    fn annotate_requires_parameters() {
        assert_eq!(annotate(&fig1()), Err(ProbError::Unparameterized));
    }

    #[test]
    fn model_counts() {
        let mut p = fig1();
        let unit = WeightFunction::uniform(3);
        p.parameterize(&unit).unwrap();
        assert!((weighted_model_count(&p, &unit).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(
            weighted_model_count_exact(&p, &unit).unwrap(),
            BigRational::from_integer(BigInt::from(4))
        );
        let w = WeightFunction::polarity(3, 0.75, 0.25).unwrap();
        p.parameterize(&w).unwrap();
        assert!((weighted_model_count(&p, &w).unwrap() - 0.375).abs() < 1e-15);

        let f = Prob::from_nodes(2, vec![Node::False, Node::True], NodeId::FALSE).unwrap();
        assert_eq!(weighted_model_count(&f, &WeightFunction::uniform(2)).unwrap(), 0.0);
        assert!(weighted_model_count_exact(&f, &WeightFunction::uniform(2))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn ln_rational_handles_huge_values() {
        let big = BigRational::new(BigInt::from(1), BigInt::from(2).pow(3000));
        let got = ln_rational(&big);
        assert!((got + 3000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(ln_rational(&BigRational::zero()), f64::NEG_INFINITY);
    }
}
