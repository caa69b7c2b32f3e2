//! Brute-force ground truth for small formulas.
//!
//! Everything here works from [`CnfFormula::evaluate_packed`] and the raw
//! literal weights; nothing is derived from compiled diagrams. Assignments
//! are packed into a `u64` with bit `v - 1` holding variable `v`, and the
//! canonical model order is ascending packed value.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Zero};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};
use thiserror::Error;

use crate::cnf::{Assignment, CnfFormula, Var, WeightFunction};
use crate::sampler::SampleBatch;

pub const MAX_ORACLE_VARS: u32 = 24;

/// Minimum expected count per chi-square bin.
pub const MIN_EXPECTED: f64 = 5.0;

pub const HISTOGRAM_CSV_HEADER: &str = "occurrences,num_unique_solutions";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle enumeration limited to {max} variables, formula has {num_vars}")]
    TooManyVariables { num_vars: u32, max: u32 },
    #[error("weighted model count is zero")]
    ZeroNormalization,
    #[error("weight function covers {found} variables, formula has {expected}")]
    WeightArity { expected: u32, found: u32 },
    #[error("sample batch is empty")]
    EmptyBatch,
    #[error("batch has {found} variables, distribution has {expected}")]
    VariableMismatch { expected: u32, found: u32 },
    #[error("sample {index} ({model}) is outside the support")]
    OutsideSupport { index: usize, model: String },
}

fn check_size(formula: &CnfFormula) -> Result<u32, OracleError> {
    let n = formula.num_vars();
    if n > MAX_ORACLE_VARS {
        return Err(OracleError::TooManyVariables {
            num_vars: n,
            max: MAX_ORACLE_VARS,
        });
    }
    Ok(n)
}

const BLOCK: u64 = 1 << 14;

fn model_bits(formula: &CnfFormula, n: u32) -> Vec<u64> {
    let total = 1u64 << n;
    let blocks = total.div_ceil(BLOCK);
    let scan = |b: u64| -> Vec<u64> {
        (b * BLOCK..((b + 1) * BLOCK).min(total))
            .filter(|&bits| formula.evaluate_packed(bits))
            .collect()
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<u64>> = {
        use rayon::prelude::*;
        (0..blocks).into_par_iter().map(scan).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<u64>> = (0..blocks).map(scan).collect();
    parts.concat()
}

/// Every satisfying assignment, in canonical order.
pub fn enumerate_models(formula: &CnfFormula) -> Result<Vec<Assignment>, OracleError> {
    let n = check_size(formula)?;
    Ok(model_bits(formula, n)
        .into_iter()
        .map(|bits| Assignment::from_packed(n, bits))
        .collect())
}

pub fn count_models(formula: &CnfFormula) -> Result<u64, OracleError> {
    let n = check_size(formula)?;
    Ok(model_bits(formula, n).len() as u64)
}

fn check_weights(formula: &CnfFormula, weights: &WeightFunction) -> Result<(), OracleError> {
    if weights.num_vars() != formula.num_vars() {
        return Err(OracleError::WeightArity {
            expected: formula.num_vars(),
            found: weights.num_vars(),
        });
    }
    Ok(())
}

fn packed_weight(weights: &WeightFunction, n: u32, bits: u64) -> f64 {
    (0..n as usize)
        .map(|s| {
            let (neg, pos) = weights.pair(Var::from_slot(s));
            if bits >> s & 1 == 1 {
                pos
            } else {
                neg
            }
        })
        .product()
}

/// Normalized model weights. Models of weight zero are left out of the
/// support.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution {
    num_vars: u32,
    support: Vec<(u64, f64)>,
    normalization: f64,
}

impl ExactDistribution {
    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Weighted model count `N`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `(packed model, probability)` in canonical order.
    pub fn packed_support(&self) -> &[(u64, f64)] {
        &self.support
    }

    pub fn support(&self) -> impl Iterator<Item = (Assignment, f64)> + '_ {
        self.support
            .iter()
            .map(|&(bits, p)| (Assignment::from_packed(self.num_vars, bits), p))
    }

    pub fn probability(&self, assignment: &Assignment) -> f64 {
        assignment
            .to_packed()
            .and_then(|bits| {
                self.support
                    .binary_search_by_key(&bits, |&(b, _)| b)
                    .ok()
                    .map(|i| self.support[i].1)
            })
            .unwrap_or(0.0)
    }

    /// Total-variation distance to another distribution over the same
    /// variables.
    pub fn tv_distance(&self, other: &ExactDistribution) -> f64 {
        let mut diff: HashMap<u64, f64> = self.support.iter().copied().collect();
        for &(bits, p) in &other.support {
            *diff.entry(bits).or_insert(0.0) -= p;
        }
        diff.values().map(|d| d.abs()).sum::<f64>() / 2.0
    }
}

pub fn exact_distribution(
    formula: &CnfFormula,
    weights: &WeightFunction,
) -> Result<ExactDistribution, OracleError> {
    let n = check_size(formula)?;
    check_weights(formula, weights)?;
    let weighted: Vec<(u64, f64)> = model_bits(formula, n)
        .into_iter()
        .map(|bits| (bits, packed_weight(weights, n, bits)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let normalization: f64 = weighted.iter().map(|&(_, w)| w).sum();
    if weighted.is_empty() || normalization <= 0.0 {
        return Err(OracleError::ZeroNormalization);
    }
    Ok(ExactDistribution {
        num_vars: n,
        support: weighted
            .into_iter()
            .map(|(bits, w)| (bits, w / normalization))
            .collect(),
        normalization,
    })
}

/// [`ExactDistribution`] with exact rational arithmetic over the
/// binary values of the given weights.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalDistribution {
    pub num_vars: u32,
    pub support: Vec<(u64, BigRational)>,
    pub normalization: BigRational,
}

impl RationalDistribution {
    pub fn to_float(&self) -> ExactDistribution {
        use num_traits::ToPrimitive;
        ExactDistribution {
            num_vars: self.num_vars,
            support: self
                .support
                .iter()
                .map(|(b, p)| (*b, p.to_f64().unwrap_or(f64::NAN)))
                .collect(),
            normalization: self.normalization.to_f64().unwrap_or(f64::NAN),
        }
    }
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("weights are finite")
}

/// Exact weighted model count over all 2^n assignments.
pub fn weighted_count_rational(
    formula: &CnfFormula,
    weights: &WeightFunction,
) -> Result<BigRational, OracleError> {
    match exact_distribution_rational(formula, weights) {
        Ok(d) => Ok(d.normalization),
        Err(OracleError::ZeroNormalization) => Ok(BigRational::zero()),
        Err(e) => Err(e),
    }
}

pub fn exact_distribution_rational(
    formula: &CnfFormula,
    weights: &WeightFunction,
) -> Result<RationalDistribution, OracleError> {
    let n = check_size(formula)?;
    check_weights(formula, weights)?;
    let pairs: Vec<(BigRational, BigRational)> = weights
        .pairs()
        .iter()
        .map(|&(neg, pos)| (rational(neg), rational(pos)))
        .collect();
    let mut weighted = Vec::new();
    let mut normalization = BigRational::zero();
    for bits in model_bits(formula, n) {
        let mut w = BigRational::one();
        for (s, (neg, pos)) in pairs.iter().enumerate() {
            w *= if bits >> s & 1 == 1 { pos } else { neg };
        }
        if !w.is_zero() {
            normalization += &w;
            weighted.push((bits, w));
        }
    }
    if weighted.is_empty() {
        return Err(OracleError::ZeroNormalization);
    }
    let support = weighted
        .into_iter()
        .map(|(bits, w)| (bits, w / &normalization))
        .collect();
    Ok(RationalDistribution {
        num_vars: n,
        support,
        normalization,
    })
}

/// Pearson statistic with its degrees of freedom and upper-tail p-value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareFit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pools bins in the given order until each pooled bin expects at least
/// [`MIN_EXPECTED`]; a short final pool is merged into its predecessor.
fn pooled(bins: impl IntoIterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (obs, exp) in bins {
        acc.0 += obs;
        acc.1 += exp;
        if acc.1 >= MIN_EXPECTED {
            out.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        match out.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => out.push(acc),
        }
    }
    out
}

fn chi_square(bins: &[(f64, f64)]) -> ChiSquareFit {
    let statistic: f64 = bins
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        dist.sf(statistic)
    };
    ChiSquareFit {
        statistic,
        degrees_of_freedom: dof,
        p_value,
    }
}

/// Occurrence count → number of distinct models sampled that many times.
pub type Histogram = BTreeMap<u64, u64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub k: usize,
    pub tv_distance: f64,
    pub chi_square: ChiSquareFit,
    /// `(packed model, observed count)` for every support model.
    pub counts: Vec<(u64, u64)>,
    /// Includes the zero bin for support models never drawn.
    pub histogram: Histogram,
}

impl Comparison {
    pub fn histogram_csv(&self) -> String {
        histogram_csv(&self.histogram)
    }
}

pub fn compare(batch: &SampleBatch, exact: &ExactDistribution) -> Result<Comparison, OracleError> {
    if batch.is_empty() {
        return Err(OracleError::EmptyBatch);
    }
    if batch.num_vars() != exact.num_vars {
        return Err(OracleError::VariableMismatch {
            expected: exact.num_vars,
            found: batch.num_vars(),
        });
    }
    let index: HashMap<u64, usize> = exact
        .support
        .iter()
        .enumerate()
        .map(|(i, &(bits, _))| (bits, i))
        .collect();
    let mut observed = vec![0u64; exact.support.len()];
    for i in 0..batch.len() {
        let bits = batch.packed(i).first().copied().unwrap_or(0);
        match index.get(&bits) {
            Some(&j) => observed[j] += 1,
            None => {
                return Err(OracleError::OutsideSupport {
                    index: i,
                    model: batch.get(i).to_dimacs_line(),
                })
            }
        }
    }
    let k = batch.len();
    let kf = k as f64;
    let tv_distance = exact
        .support
        .iter()
        .zip(&observed)
        .map(|(&(_, p), &c)| (c as f64 / kf - p).abs())
        .sum::<f64>()
        / 2.0;

    let mut bins: Vec<(f64, f64)> = exact
        .support
        .iter()
        .zip(&observed)
        .map(|(&(_, p), &c)| (c as f64, p * kf))
        .collect();
    bins.sort_by(|a, b| a.1.total_cmp(&b.1));
    let chi_square = chi_square(&pooled(bins));

    let mut histogram = Histogram::new();
    for &c in &observed {
        *histogram.entry(c).or_insert(0) += 1;
    }
    Ok(Comparison {
        k,
        tv_distance,
        chi_square,
        counts: exact
            .support
            .iter()
            .map(|&(bits, _)| bits)
            .zip(observed)
            .collect(),
        histogram,
    })
}

/// Expected number of support models drawn exactly `c` times in `k` draws,
/// for every `c` with non-negligible mass.
pub fn expected_histogram(exact: &ExactDistribution, k: usize) -> BTreeMap<u64, f64> {
    let mut out = BTreeMap::new();
    let kf = k as f64;
    for &(_, p) in &exact.support {
        let mean = p * kf;
        let sd = (mean * (1.0 - p)).sqrt();
        let lo = (mean - 12.0 * sd - 10.0).floor().max(0.0) as u64;
        let hi = ((mean + 12.0 * sd + 10.0).ceil() as u64).min(k as u64);
        let dist = Binomial::new(p.min(1.0), k as u64).expect("valid binomial");
        for c in lo..=hi {
            let m = dist.ln_pmf(c).exp();
            if m > 0.0 {
                *out.entry(c).or_insert(0.0) += m;
            }
        }
    }
    out
}

/// Goodness of fit of an observed histogram against [`expected_histogram`],
/// pooling adjacent occurrence bins.
pub fn histogram_fit(observed: &Histogram, expected: &BTreeMap<u64, f64>) -> ChiSquareFit {
    let mut keys: Vec<u64> = expected.keys().chain(observed.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let bins = keys.into_iter().map(|c| {
        (
            observed.get(&c).copied().unwrap_or(0) as f64,
            expected.get(&c).copied().unwrap_or(0.0),
        )
    });
    chi_square(&pooled(bins))
}

pub fn histogram_csv(histogram: &Histogram) -> String {
    let mut out = String::from(HISTOGRAM_CSV_HEADER);
    out.push('\n');
    for (occ, n) in histogram {
        let _ = writeln!(out, "{occ},{n}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;

    fn running() -> CnfFormula {
        parse_dimacs("p cnf 3 2\n1 2 0\n-1 -3 0\n").unwrap()
    }

    fn model(lits: &[i64]) -> Assignment {
        Assignment::parse_dimacs_line(3, &format!("{} 0", lits.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" "))).unwrap()
    }

    #[test]
    fn models_of_running_example() {
        let ms = enumerate_models(&running()).unwrap();
        assert_eq!(ms.len(), 4);
        for m in [[1, 2, -3], [1, -2, -3], [-1, 2, 3], [-1, 2, -3]] {
            assert!(ms.contains(&model(&m)));
        }
        let packed: Vec<u64> = ms.iter().map(|a| a.to_packed().unwrap()).collect();
        assert!(packed.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn trivial_formulas() {
        let unsat = parse_dimacs("p cnf 2 2\n1 0\n-1 0\n").unwrap();
        assert!(enumerate_models(&unsat).unwrap().is_empty());
        let valid = parse_dimacs("p cnf 3 0\n").unwrap();
        assert_eq!(enumerate_models(&valid).unwrap().len(), 8);
        let big = parse_dimacs("p cnf 25 0\n").unwrap();
        assert!(matches!(
            enumerate_models(&big),
            Err(OracleError::TooManyVariables { num_vars: 25, .. })
        ));
    }

    #[test]
    fn distribution_examples() {
        let f = running();
        let d = exact_distribution(&f, &WeightFunction::polarity(3, 0.75, 0.25).unwrap()).unwrap();
        assert!((d.normalization() - 0.375).abs() < 1e-15);
        assert!((d.probability(&model(&[1, 2, -3])) - 0.375).abs() < 1e-12);
        assert!((d.probability(&model(&[1, -2, -3])) - 0.125).abs() < 1e-12);
        assert!((d.probability(&model(&[-1, 2, 3])) - 0.375).abs() < 1e-12);
        assert!((d.probability(&model(&[-1, 2, -3])) - 0.125).abs() < 1e-12);
        assert!((d.packed_support().iter().map(|s| s.1).sum::<f64>() - 1.0).abs() < 1e-12);

        let u = exact_distribution(&f, &WeightFunction::uniform(3)).unwrap();
        assert!(u.packed_support().iter().all(|&(_, p)| p == 0.25));

        let no_y = WeightFunction::from_pairs(vec![(1.0, 1.0), (1.0, 0.0), (1.0, 1.0)]).unwrap();
        let d = exact_distribution(&f, &no_y).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.probability(&model(&[1, -2, -3])), 1.0);

        let dead = WeightFunction::from_pairs(vec![(1.0, 1.0), (0.0, 1.0), (1.0, 0.0)]).unwrap();
        let g = parse_dimacs("p cnf 3 1\n-2 3 0\n").unwrap();
        assert_eq!(exact_distribution(&g, &dead), Err(OracleError::ZeroNormalization));
    }

    #[test]
    fn rational_distribution_sums_to_one() {
        let d = exact_distribution_rational(&running(), &WeightFunction::polarity(3, 0.75, 0.25).unwrap())
            .unwrap();
        let total: BigRational = d.support.iter().map(|(_, p)| p.clone()).sum();
        assert!(total.is_one());
        assert_eq!(d.normalization, BigRational::new(3.into(), 8.into()));
        assert_eq!(
            weighted_count_rational(&parse_dimacs("p cnf 1 2\n1 0\n-1 0\n").unwrap(), &WeightFunction::uniform(1)),
            Ok(BigRational::zero())
        );
    }

    fn batch_of(models: &[u64]) -> SampleBatch {
        SampleBatch::from_packed(3, models.to_vec())
    }

    #[test]
    fn perfect_batch_has_zero_distance() {
        let d = exact_distribution(&running(), &WeightFunction::uniform(3)).unwrap();
        let models: Vec<u64> = d.packed_support().iter().flat_map(|&(b, _)| [b; 5]).collect();
        let c = compare(&batch_of(&models), &d).unwrap();
        assert_eq!(c.tv_distance, 0.0);
        assert_eq!(c.chi_square.statistic, 0.0);
        assert_eq!(c.histogram, Histogram::from([(5, 4)]));
        assert_eq!(c.histogram_csv(), "occurrences,num_unique_solutions\n5,4\n");
    }

    #[test]
    fn non_model_is_a_hard_failure() {
        let d = exact_distribution(&running(), &WeightFunction::uniform(3)).unwrap();
        // x y z violates the second clause
        let err = compare(&batch_of(&[0b010, 0b111]), &d).unwrap_err();
        assert_eq!(
            err,
            OracleError::OutsideSupport {
                index: 1,
                model: "1 2 3 0".into()
            }
        );
    }

    #[test]
    fn distribution_distance() {
        let f = running();
        let a = exact_distribution(&f, &WeightFunction::uniform(3)).unwrap();
        let b = exact_distribution(&f, &WeightFunction::polarity(3, 0.75, 0.25).unwrap()).unwrap();
        assert_eq!(a.tv_distance(&a), 0.0);
        assert!((a.tv_distance(&b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn expected_histogram_mass() {
        let d = exact_distribution(&running(), &WeightFunction::polarity(3, 0.75, 0.25).unwrap()).unwrap();
        let h = expected_histogram(&d, 1000);
        let total: f64 = h.values().sum();
        assert!((total - 4.0).abs() < 1e-9);
        let fit = histogram_fit(&Histogram::from([(375, 2), (125, 2)]), &h);
        assert!(fit.p_value > 0.001);
    }

    #[test]
    fn pooling_merges_small_bins() {
        let bins = pooled([(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (10.0, 10.0), (0.0, 1.0)]);
        assert_eq!(bins, vec![(6.0, 6.0), (10.0, 11.0)]);
    }
}
