//! Weighted sampling of satisfying assignments from a smooth, parameterized
//! diagram.
//!
//! One bottom-up pass computes each node's joint probability and, at the
//! same time, `k` partial assignments per node: conjunctions OR their
//! children's partial assignments index by index, decision nodes draw each
//! index's branch with probability `p_hi / p_joint`. Partial assignments are
//! stored as value bitmasks; the set of assigned variables at a node is
//! `Vars(n)` for every index, so it is not stored per sample.
//!
//! Sample indices are processed in fixed-size chunks. Chunk `c` draws from
//! ChaCha8 stream `c` of the seed, so results depend only on the seed and
//! never on the thread schedule.

mod incremental;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cnf::{Assignment, Var, WeightFunction};
use crate::prob::{eval_node, Domain, ExactParams, LogSpace, Node, NodeEval, NodeId, Prob, ProbError};
use crate::varset::words_for;

pub use incremental::{
    default_update_rule, run_incremental, run_incremental_on, write_round_csv, ConstantRule,
    DiversityRule, IncrementalConfig, IncrementalError, RoundReport, RoundTiming, UpdateRule,
    ROUND_CSV_HEADER,
};

/// Sample indices per RNG stream.
pub const CHUNK_SIZE: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("no satisfying assignment has positive weight")]
    Unsatisfiable,
    #[error("diagram is not smooth; run smoothing first")]
    NotSmooth,
    #[error("diagram has no branch parameters")]
    Unparameterized,
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Annotation arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Log,
    /// Arbitrary-precision rationals.
    Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Chunks run on the rayon pool when the `parallel` feature is enabled,
    /// sequentially otherwise. Output is identical either way.
    #[default]
    Parallel,
}

/// `k` complete assignments drawn with replacement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleBatch {
    num_vars: u32,
    len: usize,
    words: usize,
    bits: Vec<u64>,
    seed: u64,
    round: usize,
}

impl SampleBatch {
    /// Builds a batch from rows of `words_for(num_vars)` packed words each.
    pub fn from_packed(num_vars: u32, bits: Vec<u64>) -> Self {
        let words = words_for(num_vars);
        assert!(words > 0 && bits.len().is_multiple_of(words), "rows must be whole");
        SampleBatch {
            num_vars,
            len: bits.len() / words,
            words,
            bits,
            seed: 0,
            round: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub(crate) fn with_round(mut self, round: usize) -> Self {
        self.round = round;
        self
    }

    /// Value bits of sample `i`; bit `v - 1` holds variable `v`.
    pub fn packed(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn value(&self, i: usize, var: Var) -> bool {
        let slot = var.slot();
        (self.packed(i)[slot / 64] >> (slot % 64)) & 1 == 1
    }

    pub fn get(&self, i: usize) -> Assignment {
        let row = self.packed(i);
        Assignment::from_bools((0..self.num_vars as usize).map(|s| (row[s / 64] >> (s % 64)) & 1 == 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = Assignment> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Fraction of samples with `var` true.
    pub fn positive_frequency(&self, var: Var) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        let ones = (0..n).filter(|&i| self.value(i, var)).count();
        ones as f64 / n as f64
    }

    /// One DIMACS model line per sample.
    pub fn to_dimacs_lines(&self) -> String {
        let mut out = String::new();
        for a in self.iter() {
            out.push_str(&a.to_dimacs_line());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutcome {
    pub batch: SampleBatch,
    pub root_log_prob: f64,
}

/// Log-space sampling with the default execution.
pub fn sample(prob: &Prob, k: usize, seed: u64) -> Result<SampleBatch, SampleError> {
    Ok(sample_with(prob, k, seed, Mode::Log, Execution::default())?.batch)
}

/// Same output as [`sample`], never using the thread pool.
pub fn sample_sequential(prob: &Prob, k: usize, seed: u64) -> Result<SampleBatch, SampleError> {
    Ok(sample_with(prob, k, seed, Mode::Log, Execution::Sequential)?.batch)
}

pub fn sample_with(
    prob: &Prob,
    k: usize,
    seed: u64,
    mode: Mode,
    execution: Execution,
) -> Result<SampleOutcome, SampleError> {
    match mode {
        Mode::Log => {
            let (batch, phi) = sample_in(prob, &LogSpace, k, seed, execution)?;
            Ok(SampleOutcome {
                batch,
                root_log_prob: phi[prob.root().index()],
            })
        }
        Mode::Rational => {
            let (batch, phi) = sample_in(prob, &ExactParams, k, seed, execution)?;
            Ok(SampleOutcome {
                batch,
                root_log_prob: ExactParams.ln(&phi[prob.root().index()]),
            })
        }
    }
}

/// Re-parameterizes a compiled, smooth diagram. Structure is untouched.
pub fn update_weights(prob: &mut Prob, weights: &WeightFunction) -> Result<(), SampleError> {
    if !prob.is_smooth() {
        return Err(SampleError::NotSmooth);
    }
    prob.parameterize(weights)?;
    Ok(())
}

struct Plan {
    reachable: Vec<bool>,
    parents: Vec<u32>,
    words: usize,
}

/// Draws `k` samples under `domain`, returning the batch and the joint
/// probabilities computed during the pass (from the first chunk; every chunk
/// computes identical values).
pub fn sample_in<D: Domain>(
    prob: &Prob,
    domain: &D,
    k: usize,
    seed: u64,
    execution: Execution,
) -> Result<(SampleBatch, Vec<D::Value>), SampleError> {
    if k == 0 {
        return Err(SampleError::ZeroSamples);
    }
    if !prob.is_parameterized() {
        return Err(SampleError::Unparameterized);
    }
    if !prob.is_smooth() {
        return Err(SampleError::NotSmooth);
    }
    let reachable = prob.reachable();
    let mut parents = vec![0u32; prob.len()];
    for (i, node) in prob.nodes().iter().enumerate() {
        if reachable[i] {
            node.for_each_child(|c| parents[c.index()] += 1);
        }
    }
    let plan = Plan {
        reachable,
        parents,
        words: words_for(prob.num_vars()),
    };
    let chunks: Vec<(usize, usize)> = (0..k)
        .step_by(CHUNK_SIZE)
        .map(|start| (start, CHUNK_SIZE.min(k - start)))
        .collect();
    let run = |(index, &(_, len)): (usize, &(usize, usize))| {
        run_chunk(prob, domain, &plan, seed, index as u64, len)
    };

    let results: Vec<(Vec<u64>, Vec<D::Value>)> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            chunks
                .par_iter()
                .enumerate()
                .map(run)
                .collect::<Result<_, _>>()?
        }
        _ => chunks
            .iter()
            .enumerate()
            .map(run)
            .collect::<Result<_, _>>()?,
    };

    let mut bits = Vec::with_capacity(k * plan.words);
    let mut phi = None;
    for (rows, values) in results {
        bits.extend_from_slice(&rows);
        phi.get_or_insert(values);
    }
    let batch = SampleBatch {
        num_vars: prob.num_vars(),
        len: k,
        words: plan.words,
        bits,
        seed,
        round: 1,
    };
    Ok((batch, phi.expect("k >= 1 gives at least one chunk")))
}

fn run_chunk<D: Domain>(
    prob: &Prob,
    domain: &D,
    plan: &Plan,
    seed: u64,
    stream: u64,
    len: usize,
) -> Result<(Vec<u64>, Vec<D::Value>), SampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let words = plan.words;
    let n = prob.len();
    let root = prob.root().index();
    let mut phi: Vec<D::Value> = Vec::with_capacity(n);
    let mut omega: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut remaining = plan.parents.clone();

    for (i, node) in prob.nodes().iter().enumerate() {
        let eval = eval_node(domain, node, &phi)?;
        if !plan.reachable[i] {
            phi.push(eval.into_value());
            continue;
        }
        let value = match eval {
            NodeEval::Value(v) => {
                if !domain.is_zero(&v) {
                    omega[i] = match node {
                        Node::Conj { children } => {
                            let mut rows = reuse(&mut omega, &remaining, children[0]);
                            for c in &children[1..] {
                                for (a, b) in rows.iter_mut().zip(&omega[c.index()]) {
                                    *a |= b;
                                }
                            }
                            rows
                        }
                        _ => vec![0; len * words],
                    };
                }
                v
            }
            NodeEval::Decision { hi, joint } => {
                if !domain.is_zero(&joint) {
                    let Node::Decision { var, lo, hi: hi_id, .. } = node else {
                        unreachable!("decision evaluation comes from a decision node")
                    };
                    let p = domain.hi_fraction(&hi, &joint);
                    let slot = var.slot();
                    let (word, bit) = (slot / 64, 1u64 << (slot % 64));
                    let rows = if p >= 1.0 {
                        let mut rows = reuse(&mut omega, &remaining, *hi_id);
                        for row in rows.chunks_exact_mut(words) {
                            row[word] |= bit;
                        }
                        rows
                    } else if p <= 0.0 {
                        reuse(&mut omega, &remaining, *lo)
                    } else {
                        let mut rows = reuse(&mut omega, &remaining, *lo);
                        let hi_rows = &omega[hi_id.index()];
                        for (dst, src) in rows.chunks_exact_mut(words).zip(hi_rows.chunks_exact(words)) {
                            if rng.random::<f64>() < p {
                                dst.copy_from_slice(src);
                                dst[word] |= bit;
                            }
                        }
                        rows
                    };
                    omega[i] = rows;
                }
                joint
            }
        };
        phi.push(value);
        node.for_each_child(|c| {
            let c = c.index();
            remaining[c] -= 1;
            if remaining[c] == 0 && c != root {
                omega[c] = Vec::new();
            }
        });
    }

    if domain.is_zero(&phi[root]) {
        return Err(SampleError::Unsatisfiable);
    }
    let rows = std::mem::take(&mut omega[root]);
    Ok((rows, phi))
}

/// The partial samples of `child`, moved out when the current node is its
/// last remaining parent.
fn reuse(omega: &mut [Vec<u64>], remaining: &[u32], child: NodeId) -> Vec<u64> {
    let c = child.index();
    if remaining[c] == 1 && c > 1 {
        std::mem::take(&mut omega[c])
    } else {
        omega[c].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::annotate;

    fn fig1() -> Prob {
        crate::compiler::import_prob(
            "prob 1.0\nnvars 3\nnnodes 9\n0 F\n1 T\n2 D 2 0 1\n3 D 3 1 0\n4 D 3 1 1\n\
             5 A 2 2 4\n6 D 2 1 1\n7 A 2 3 6\n8 D 1 5 7\nroot 8\n",
        )
        .unwrap()
    }

    #[test]
    fn degenerate_weights_fix_the_sample() {
        let mut p = Prob::from_nodes(
            1,
            vec![
                Node::False,
                Node::True,
                Node::decision(Var::new(1).unwrap(), NodeId::TRUE, NodeId::TRUE),
            ],
            NodeId(2),
        )
        .unwrap();
        p.parameterize(&WeightFunction::from_pairs(vec![(0.0, 1.0)]).unwrap())
            .unwrap();
        let b = sample(&p, 5000, 3).unwrap();
        assert_eq!(b.len(), 5000);
        assert!(b.iter().all(|a| a == Assignment::from_bools([true])));
    }

    #[test]
    fn samples_are_models_and_complete() {
        let mut p = fig1();
        p.parameterize(&WeightFunction::polarity(3, 0.75, 0.25).unwrap())
            .unwrap();
        let f = crate::cnf::parse_dimacs("p cnf 3 2\n1 2 0\n-1 -3 0\n").unwrap();
        let b = sample(&p, 10_000, 11).unwrap();
        for a in b.iter() {
            assert!(a.is_complete());
            assert!(f.evaluate(&a).unwrap());
        }
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let mut p = fig1();
        p.parameterize(&WeightFunction::uniform(3)).unwrap();
        let k = 3 * CHUNK_SIZE + 17;
        let a = sample(&p, k, 99).unwrap();
        let b = sample(&p, k, 99).unwrap();
        let c = sample_sequential(&p, k, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(a, sample(&p, k, 100).unwrap());
    }

    #[test]
    fn fused_annotation_matches_annotate() {
        let mut p = fig1();
        p.parameterize(&WeightFunction::polarity(3, 0.6, 1.7).unwrap())
            .unwrap();
        let (_, phi) = sample_in(&p, &LogSpace, 10, 0, Execution::Sequential).unwrap();
        let cache = annotate(&p).unwrap();
        for (i, v) in phi.iter().enumerate() {
            assert_eq!(v.to_bits(), cache.get(NodeId(i as u32)).to_bits());
        }
    }

    #[test]
    fn preconditions() {
        let p = fig1();
        assert_eq!(sample(&p, 1, 0), Err(SampleError::Unparameterized));
        let mut q = p.clone();
        q.parameterize(&WeightFunction::uniform(3)).unwrap();
        assert_eq!(sample(&q, 0, 0), Err(SampleError::ZeroSamples));

        let mut rough = crate::compiler::import_prob(
            "prob 1.0\nnvars 3\nnnodes 5\n0 F\n1 T\n2 D 2 0 1\n3 D 3 1 0\n4 D 1 2 3\nroot 4\n",
        )
        .unwrap();
        rough.parameterize(&WeightFunction::uniform(3)).unwrap();
        assert_eq!(sample(&rough, 1, 0), Err(SampleError::NotSmooth));
        assert_eq!(
            update_weights(&mut rough, &WeightFunction::uniform(3)),
            Err(SampleError::NotSmooth)
        );

        // only model needs y, but W(y) = 0
        let mut zero = q.clone();
        zero.parameterize(
            &WeightFunction::from_pairs(vec![(1.0, 0.0), (1.0, 0.0), (1.0, 1.0)]).unwrap(),
        )
        .unwrap();
        assert_eq!(sample(&zero, 1, 0), Err(SampleError::Unsatisfiable));
    }

    #[test]
    fn rational_mode_samples_models() {
        let mut p = fig1();
        p.parameterize(&WeightFunction::polarity(3, 0.75, 0.25).unwrap())
            .unwrap();
        let out = sample_with(&p, 100, 5, Mode::Rational, Execution::Sequential).unwrap();
        assert!((out.root_log_prob - 0.375f64.ln()).abs() < 1e-12);
        assert_eq!(out.batch.len(), 100);
    }

    #[test]
    fn model_line_output() {
        let mut p = fig1();
        p.parameterize(&WeightFunction::polarity(3, 1.0, 0.0).unwrap())
            .unwrap();
        // only -x y z carries weight under these pairs
        let mut q = fig1();
        q.parameterize(
            &WeightFunction::from_pairs(vec![(1.0, 0.0), (0.0, 1.0), (0.0, 1.0)]).unwrap(),
        )
        .unwrap();
        let b = sample(&q, 2, 1).unwrap();
        assert_eq!(b.to_dimacs_lines(), "-1 2 3 0\n-1 2 3 0\n");
        assert_eq!(sample(&p, 1, 1), Err(SampleError::Unsatisfiable));
    }
}
