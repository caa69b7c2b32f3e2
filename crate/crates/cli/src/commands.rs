use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use prob_sampler::cnf::{parse_dimacs, parse_weights, CnfFormula, WeightFunction};
use prob_sampler::compiler::{choose_ordering, compile_with, export_prob, import_prob, CompileOptions};
use prob_sampler::oracle::{compare, exact_distribution, expected_histogram, histogram_fit};
use prob_sampler::prob::{annotate, annotate_exact, ln_rational, NodeId, Prob, Property};
use prob_sampler::sampler::{
    run_incremental, run_incremental_on, sample_with, write_round_csv, ConstantRule, DiversityRule,
    Execution, IncrementalConfig, RoundReport, UpdateRule,
};

use crate::args::{CheckArgs, CompileArgs, CompileOpts, DistArgs, IncArgs, SampleArgs, SamplingOpts, SmoothArgs, Source};
use crate::error::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn load_cnf(path: &Path) -> Result<CnfFormula, CliError> {
    parse_dimacs(&read(path)?).map_err(|source| CliError::Cnf {
        path: path.to_path_buf(),
        source,
    })
}

fn load_prob(path: &Path) -> Result<Prob, CliError> {
    import_prob(&read(path)?).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source,
    })
}

fn load_weights(path: Option<&PathBuf>, num_vars: u32) -> Result<WeightFunction, CliError> {
    match path {
        Some(path) => {
            let shape = CnfFormula::new(num_vars, Vec::new()).map_err(|source| CliError::Cnf {
                path: path.clone(),
                source,
            })?;
            parse_weights(&read(path)?, &shape).map_err(|source| CliError::Cnf {
                path: path.clone(),
                source,
            })
        }
        None => {
            warn!("no weight file given; using uniform weights");
            Ok(WeightFunction::uniform(num_vars))
        }
    }
}

fn compile_formula(formula: &CnfFormula, opts: &CompileOpts) -> Result<Prob, CliError> {
    let ordering = choose_ordering(formula, opts.ordering.into());
    let prob = compile_with(
        formula,
        &ordering,
        CompileOptions {
            max_vars: opts.max_vars,
        },
    )?;
    if prob.root() == NodeId::FALSE {
        warn!("formula is unsatisfiable; diagram root is the false terminal");
    }
    Ok(prob)
}

fn load_source(source: &Source, opts: &CompileOpts) -> Result<Prob, CliError> {
    let prob = match (&source.cnf, &source.prob) {
        (Some(cnf), _) => compile_formula(&load_cnf(cnf)?, opts)?,
        (None, Some(prob)) => load_prob(prob)?,
        (None, None) => unreachable!("clap requires one input source"),
    };
    if !prob.is_smooth() {
        info!("smoothing diagram");
    }
    Ok(prob.smooth())
}

fn execution(opts: &SamplingOpts) -> Result<Execution, CliError> {
    if opts.threads <= 1 {
        return Ok(Execution::Sequential);
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads as usize)
            .build_global()
            .map_err(|e| CliError::Threads(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    warn!("built without parallel support; sampling on one thread");
    Ok(Execution::Parallel)
}

fn print_counts(prob: &Prob) {
    let c = prob.counts();
    eprintln!("nodes: {}", c.total);
    eprintln!("conjunction nodes: {}", c.conj);
    eprintln!("decision nodes: {}", c.decision);
}

pub fn compile(args: &CompileArgs) -> Result<(), CliError> {
    let formula = load_cnf(&args.cnf)?;
    let mut prob = compile_formula(&formula, &args.compile)?;
    if args.smooth {
        prob = prob.smooth();
    }
    print_counts(&prob);
    emit(args.out.as_ref(), &export_prob(&prob))
}

pub fn smooth(args: &SmoothArgs) -> Result<(), CliError> {
    let prob = load_prob(&args.prob)?;
    let (smooth, stats) = prob.smooth_with_stats();
    info!(
        "added {} don't-care nodes and {} conjunction wrappers",
        stats.dont_care_created, stats.wrappers_created
    );
    print_counts(&smooth);
    emit(args.out.as_ref(), &export_prob(&smooth))
}

pub fn sample(args: &SampleArgs) -> Result<(), CliError> {
    let execution = execution(&args.sampling)?;
    let mut prob = load_source(&args.source, &args.compile)?;
    let weights = load_weights(args.sampling.weights.as_ref(), prob.num_vars())?;
    prob.parameterize(&weights)?;
    let outcome = sample_with(
        &prob,
        args.sampling.k as usize,
        args.sampling.seed,
        args.sampling.mode.into(),
        execution,
    )?;
    emit(args.out.as_ref(), &outcome.batch.to_dimacs_lines())
}

pub fn inc(args: &IncArgs) -> Result<(), CliError> {
    let execution = execution(&args.sampling)?;
    let config = IncrementalConfig {
        rounds: args.rounds as usize,
        k: args.sampling.k as usize,
        seed: args.sampling.seed,
        mode: args.sampling.mode.into(),
        execution,
        ordering: args.compile.ordering.into(),
        compile: CompileOptions {
            max_vars: args.compile.max_vars,
        },
    };
    let reports = match (&args.source.cnf, &args.source.prob) {
        (Some(cnf), _) => {
            let formula = load_cnf(cnf)?;
            let weights = load_weights(args.sampling.weights.as_ref(), formula.num_vars())?;
            let mut rule = pick_rule(args.constant, &weights);
            run_incremental(&formula, &weights, &config, &mut rule)?
        }
        (None, Some(path)) => {
            let prob = load_prob(path)?;
            let weights = load_weights(args.sampling.weights.as_ref(), prob.num_vars())?;
            let mut rule = pick_rule(args.constant, &weights);
            run_incremental_on(prob, &weights, &config, &mut rule)?
        }
        (None, None) => unreachable!("clap requires one input source"),
    };
    emit(args.out.as_ref(), &round_models(&reports))?;
    let csv = write_round_csv(&reports);
    match &args.report {
        Some(path) => emit(Some(path), &csv),
        None => {
            eprint!("{csv}");
            Ok(())
        }
    }
}

enum Rule {
    Diversity(DiversityRule),
    Constant(ConstantRule),
}

impl UpdateRule for Rule {
    fn next_weights(
        &mut self,
        samples: &prob_sampler::sampler::SampleBatch,
        previous: &WeightFunction,
    ) -> WeightFunction {
        match self {
            Rule::Diversity(r) => r.next_weights(samples, previous),
            Rule::Constant(r) => r.next_weights(samples, previous),
        }
    }
}

fn pick_rule(constant: bool, weights: &WeightFunction) -> Rule {
    if constant {
        Rule::Constant(ConstantRule(weights.clone()))
    } else {
        Rule::Diversity(DiversityRule)
    }
}

fn round_models(reports: &[RoundReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "c round {}", r.round);
        out.push_str(&r.samples.to_dimacs_lines());
    }
    out
}

/// Relative agreement required between log and rational annotation.
const ANNOTATION_TOLERANCE: f64 = 1e-9;

pub fn check(args: &CheckArgs) -> Result<(), CliError> {
    let mut prob = load_prob(&args.prob)?;
    let mut failures = Vec::new();
    for property in [Property::Determinism, Property::Decomposability, Property::Smoothness] {
        match prob.find_violation(property) {
            Some(node) => failures.push(format!("{property} violated at node {node}")),
            None => println!("{property}: ok"),
        }
    }
    if failures.is_empty() {
        let weights = load_weights(args.weights.as_ref(), prob.num_vars())?;
        prob.parameterize(&weights)?;
        let log = annotate(&prob)?.root_log_prob();
        let exact = ln_rational(&annotate_exact(&prob)?[prob.root().index()]);
        let agree = (log == exact) || ((log - exact).abs() <= ANNOTATION_TOLERANCE * exact.abs().max(1.0));
        if log > 1e-12 || !agree {
            failures.push(format!(
                "annotation inconsistent: log {log}, rational {exact}"
            ));
        } else {
            println!("annotation: ok (root log probability {log})");
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("\n")))
    }
}

pub fn dist(args: &DistArgs) -> Result<(), CliError> {
    let execution = execution(&args.sampling)?;
    let formula = load_cnf(&args.cnf)?;
    let weights = load_weights(args.sampling.weights.as_ref(), formula.num_vars())?;
    let exact = exact_distribution(&formula, &weights)?;
    let mut prob = compile_formula(&formula, &args.compile)?.smooth();
    prob.parameterize(&weights)?;
    let k = args.sampling.k as usize;
    let start = Instant::now();
    let outcome = sample_with(&prob, k, args.sampling.seed, args.sampling.mode.into(), execution)?;
    info!("sampled {k} in {:.3}s", start.elapsed().as_secs_f64());
    let cmp = compare(&outcome.batch, &exact)?;
    let fig = histogram_fit(&cmp.histogram, &expected_histogram(&exact, k));
    eprintln!("models: {}", exact.len());
    eprintln!("tv_distance: {}", cmp.tv_distance);
    eprintln!(
        "chi_square: {} (df {}, p {})",
        cmp.chi_square.statistic, cmp.chi_square.degrees_of_freedom, cmp.chi_square.p_value
    );
    eprintln!(
        "histogram_chi_square: {} (df {}, p {})",
        fig.statistic, fig.degrees_of_freedom, fig.p_value
    );
    emit(args.out.as_ref(), &cmp.histogram_csv())
}
