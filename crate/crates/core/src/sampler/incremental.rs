use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::cnf::{CnfFormula, Var, WeightFunction};
use crate::compiler::{choose_ordering, compile_with, CompileError, CompileOptions, OrderingHeuristic};
use crate::prob::{Prob, ProbError};

use super::{sample_with, update_weights, Execution, Mode, SampleBatch, SampleError};

pub const ROUND_CSV_HEADER: &str = "round,compile_s,smooth_s,param_s,sample_s,total_s,root_log_prob";

#[derive(Debug, Error)]
pub enum IncrementalError {
    #[error("rounds and k must both be at least 1")]
    InvalidConfig,
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Weights(#[from] ProbError),
}

/// Produces the next round's weights from the previous round's samples.
pub trait UpdateRule {
    fn next_weights(&mut self, samples: &SampleBatch, previous: &WeightFunction) -> WeightFunction;
}

impl<F> UpdateRule for F
where
    F: FnMut(&SampleBatch, &WeightFunction) -> WeightFunction,
{
    fn next_weights(&mut self, samples: &SampleBatch, previous: &WeightFunction) -> WeightFunction {
        self(samples, previous)
    }
}

/// Pushes each variable toward the polarity seen less often.
#[derive(Clone, Copy, Debug, Default)]
pub struct DiversityRule;

impl UpdateRule for DiversityRule {
    fn next_weights(&mut self, samples: &SampleBatch, previous: &WeightFunction) -> WeightFunction {
        default_update_rule(samples, previous)
    }
}

/// Returns the same weights every round.
#[derive(Clone, Debug)]
pub struct ConstantRule(pub WeightFunction);

impl UpdateRule for ConstantRule {
    fn next_weights(&mut self, _: &SampleBatch, _: &WeightFunction) -> WeightFunction {
        self.0.clone()
    }
}

/// With `f` the fraction of samples setting `x` true and `eps = 1/(2k)`:
/// `W(x) = max(1 - f, eps)`, `W(-x) = max(f, eps)`.
pub fn default_update_rule(samples: &SampleBatch, previous: &WeightFunction) -> WeightFunction {
    let eps = 1.0 / (2.0 * samples.len().max(1) as f64);
    let pairs = (0..previous.num_vars() as usize)
        .map(|slot| {
            let f = samples.positive_frequency(Var::from_slot(slot));
            (f.max(eps), (1.0 - f).max(eps))
        })
        .collect();
    WeightFunction::from_pairs(pairs).expect("floored weights are positive")
}

#[derive(Clone, Debug)]
pub struct IncrementalConfig {
    pub rounds: usize,
    pub k: usize,
    pub seed: u64,
    pub mode: Mode,
    pub execution: Execution,
    pub ordering: OrderingHeuristic,
    pub compile: CompileOptions,
}

impl Default for IncrementalConfig {
    fn default() -> Self {
        IncrementalConfig {
            rounds: 10,
            k: 100,
            seed: 0,
            mode: Mode::Log,
            execution: Execution::default(),
            ordering: OrderingHeuristic::default(),
            compile: CompileOptions::default(),
        }
    }
}

/// Seconds spent in each phase of a round.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RoundTiming {
    pub compile_s: f64,
    pub smooth_s: f64,
    pub param_s: f64,
    pub sample_s: f64,
}

impl RoundTiming {
    pub fn total_s(&self) -> f64 {
        self.compile_s + self.smooth_s + self.param_s + self.sample_s
    }
}

#[derive(Clone, Debug)]
pub struct RoundReport {
    /// 1-based.
    pub round: usize,
    pub timing: RoundTiming,
    pub samples: SampleBatch,
    pub weights: WeightFunction,
    pub root_log_prob: f64,
}

impl RoundReport {
    pub fn wall_time(&self) -> f64 {
        self.timing.total_s()
    }

    pub fn csv_row(&self) -> String {
        let t = &self.timing;
        format!(
            "{},{:.9},{:.9},{:.9},{:.9},{:.9},{}",
            self.round,
            t.compile_s,
            t.smooth_s,
            t.param_s,
            t.sample_s,
            t.total_s(),
            self.root_log_prob
        )
    }
}

/// Header plus one row per round.
pub fn write_round_csv(reports: &[RoundReport]) -> String {
    let mut out = String::from(ROUND_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Compiles once, then runs `config.rounds` rounds of sampling, deriving each
/// round's weights from the previous round's samples. Round `r` uses seed
/// `config.seed + r - 1`.
pub fn run_incremental(
    formula: &CnfFormula,
    initial: &WeightFunction,
    config: &IncrementalConfig,
    rule: &mut impl UpdateRule,
) -> Result<Vec<RoundReport>, IncrementalError> {
    validate(config)?;
    let start = Instant::now();
    let ordering = choose_ordering(formula, config.ordering);
    let compiled = compile_with(formula, &ordering, config.compile)?;
    let compile_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let prob = compiled.smooth();
    let smooth_s = start.elapsed().as_secs_f64();

    let first = RoundTiming {
        compile_s,
        smooth_s,
        ..RoundTiming::default()
    };
    rounds(prob, initial, config, rule, first)
}

/// Like [`run_incremental`] for an already compiled diagram; round 1 smooths
/// it if needed.
pub fn run_incremental_on(
    prob: Prob,
    initial: &WeightFunction,
    config: &IncrementalConfig,
    rule: &mut impl UpdateRule,
) -> Result<Vec<RoundReport>, IncrementalError> {
    validate(config)?;
    let start = Instant::now();
    let prob = prob.smooth();
    let first = RoundTiming {
        smooth_s: start.elapsed().as_secs_f64(),
        ..RoundTiming::default()
    };
    rounds(prob, initial, config, rule, first)
}

fn validate(config: &IncrementalConfig) -> Result<(), IncrementalError> {
    if config.rounds == 0 || config.k == 0 {
        return Err(IncrementalError::InvalidConfig);
    }
    Ok(())
}

fn rounds(
    mut prob: Prob,
    initial: &WeightFunction,
    config: &IncrementalConfig,
    rule: &mut impl UpdateRule,
    first: RoundTiming,
) -> Result<Vec<RoundReport>, IncrementalError> {
    let mut reports: Vec<RoundReport> = Vec::with_capacity(config.rounds);
    let mut weights = initial.clone();
    for round in 1..=config.rounds {
        let mut timing = if round == 1 { first } else { RoundTiming::default() };
        if let Some(prev) = reports.last() {
            weights = rule.next_weights(&prev.samples, &weights);
        }

        let start = Instant::now();
        update_weights(&mut prob, &weights)?;
        timing.param_s = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let seed = config.seed.wrapping_add(round as u64 - 1);
        let outcome = sample_with(&prob, config.k, seed, config.mode, config.execution)?;
        timing.sample_s = start.elapsed().as_secs_f64();

        reports.push(RoundReport {
            round,
            timing,
            samples: outcome.batch.with_round(round),
            weights: weights.clone(),
            root_log_prob: outcome.root_log_prob,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;
    use crate::compiler::{compile, VariableOrdering};
    use crate::sampler::sample;

    fn running() -> CnfFormula {
        parse_dimacs("p cnf 3 2\n1 2 0\n-1 -3 0\n").unwrap()
    }

    fn batch_with_frequency(ones: usize, k: usize) -> SampleBatch {
        SampleBatch::from_packed(1, (0..k).map(|i| u64::from(i < ones)).collect())
    }

    #[test]
    fn update_rule_examples() {
        let w = WeightFunction::uniform(1);
        let x = Var::new(1).unwrap();
        let all = default_update_rule(&batch_with_frequency(100, 100), &w);
        assert_eq!(all.pair(x), (1.0, 1.0 / 200.0));
        let half = default_update_rule(&batch_with_frequency(50, 100), &w);
        assert_eq!(half.pair(x), (0.5, 0.5));
        let most = default_update_rule(&batch_with_frequency(75, 100), &w);
        assert_eq!(most.pair(x), (0.75, 0.25));
    }

    #[test]
    fn ten_rounds_reuse_the_diagram() {
        let config = IncrementalConfig {
            seed: 7,
            ..IncrementalConfig::default()
        };
        let reports =
            run_incremental(&running(), &WeightFunction::uniform(3), &config, &mut DiversityRule)
                .unwrap();
        assert_eq!(reports.len(), 10);
        for (i, r) in reports.iter().enumerate() {
            assert_eq!(r.round, i + 1);
            assert_eq!(r.samples.len(), 100);
            assert_eq!(r.samples.round(), i + 1);
            assert!(r.root_log_prob <= 0.0);
            assert!(r.wall_time() >= 0.0);
            if i > 0 {
                assert_eq!(r.timing.compile_s, 0.0);
                assert_eq!(r.timing.smooth_s, 0.0);
            }
        }
        let csv = write_round_csv(&reports);
        assert_eq!(csv.lines().count(), 11);
        assert_eq!(csv.lines().next(), Some(ROUND_CSV_HEADER));
    }

    #[test]
    fn single_round_equals_compile_and_sample() {
        let f = running();
        let w = WeightFunction::polarity(3, 0.75, 0.25).unwrap();
        let config = IncrementalConfig {
            rounds: 1,
            k: 500,
            seed: 42,
            ordering: OrderingHeuristic::Natural,
            ..IncrementalConfig::default()
        };
        let reports = run_incremental(&f, &w, &config, &mut DiversityRule).unwrap();
        let mut p = compile(&f, &VariableOrdering::natural(3)).unwrap().smooth();
        p.parameterize(&w).unwrap();
        assert_eq!(reports[0].samples, sample(&p, 500, 42).unwrap());
    }

    #[test]
    fn constant_rule_keeps_weights() {
        let w = WeightFunction::polarity(3, 0.3, 0.7).unwrap();
        let config = IncrementalConfig {
            rounds: 4,
            k: 10,
            ..IncrementalConfig::default()
        };
        let reports = run_incremental(&running(), &w, &config, &mut ConstantRule(w.clone())).unwrap();
        assert!(reports.iter().all(|r| r.weights == w));
        let first = reports[0].root_log_prob;
        assert!(reports.iter().all(|r| r.root_log_prob == first));
    }

    #[test]
    fn invalid_configs_and_unsat() {
        let w = WeightFunction::uniform(3);
        let zero = IncrementalConfig {
            rounds: 0,
            ..IncrementalConfig::default()
        };
        assert!(matches!(
            run_incremental(&running(), &w, &zero, &mut DiversityRule),
            Err(IncrementalError::InvalidConfig)
        ));
        let unsat = parse_dimacs("p cnf 1 2\n1 0\n-1 0\n").unwrap();
        assert!(matches!(
            run_incremental(&unsat, &WeightFunction::uniform(1), &IncrementalConfig::default(), &mut DiversityRule),
            Err(IncrementalError::Sample(SampleError::Unsatisfiable))
        ));
    }
}
