//! Seeded random formulas and weights for tests and benchmarks.

use rand::seq::index::sample;
use rand::Rng;

use crate::cnf::{Clause, CnfFormula, Lit, Var, WeightFunction};

/// Random CNF with `num_clauses` clauses over `num_vars` variables. Each
/// clause has between `min_width` and `max_width` literals on distinct
/// variables, each negated with probability one half.
pub fn random_cnf<R: Rng + ?Sized>(
    rng: &mut R,
    num_vars: u32,
    num_clauses: usize,
    min_width: usize,
    max_width: usize,
) -> CnfFormula {
    let n = num_vars as usize;
    let lo = min_width.clamp(1, n.max(1));
    let hi = max_width.clamp(lo, n.max(1));
    let mut clauses = Vec::with_capacity(num_clauses);
    if n > 0 {
        for _ in 0..num_clauses {
            let width = rng.random_range(lo..=hi);
            let lits = sample(rng, n, width)
                .into_iter()
                .map(|slot| Lit::new(Var::from_slot(slot), rng.random()))
                .collect::<Vec<_>>();
            clauses.push(Clause::new(lits).expect("distinct variables cannot form a tautology"));
        }
    }
    CnfFormula::new(num_vars, clauses).expect("literals are in range")
}

/// Independent weights drawn uniformly from `[lo, hi]` for every literal.
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, num_vars: u32, lo: f64, hi: f64) -> WeightFunction {
    let pairs = (0..num_vars)
        .map(|_| (rng.random_range(lo..=hi), rng.random_range(lo..=hi)))
        .collect();
    WeightFunction::from_pairs(pairs).expect("weights drawn from a positive range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shape_and_reproducibility() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let f = random_cnf(&mut a, 10, 30, 2, 4);
        assert_eq!(f, random_cnf(&mut b, 10, 30, 2, 4));
        assert_eq!(f.clauses().len(), 30);
        assert!(f.clauses().iter().all(|c| (2..=4).contains(&c.len())));
        let w = random_weights(&mut a, 10, 0.1, 10.0);
        assert!(w.pairs().iter().all(|&(n, p)| (0.1..=10.0).contains(&n) && (0.1..=10.0).contains(&p)));
    }
}
