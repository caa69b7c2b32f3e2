use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use prob_sampler::cnf::{parse_dimacs, CnfFormula, WeightFunction};
use prob_sampler::compiler::{choose_ordering, compile, OrderingHeuristic};
use prob_sampler::generate::random_cnf;
use prob_sampler::oracle::enumerate_models;
use prob_sampler::prob::{annotate, annotate_exact, Prob};
use prob_sampler::sampler::{sample_with, Execution, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn benchmark_formula() -> CnfFormula {
    parse_dimacs(include_str!("../tests/data/random_3cnf_20v.cnf")).unwrap()
}

fn prepared(f: &CnfFormula) -> Prob {
    let order = choose_ordering(f, OrderingHeuristic::OccurrenceDesc);
    let mut p = compile(f, &order).unwrap().smooth();
    p.parameterize(&WeightFunction::polarity(f.num_vars(), 0.75, 0.25).unwrap())
        .unwrap();
    p
}

fn sampling(c: &mut Criterion) {
    let f = benchmark_formula();
    let p = prepared(&f);
    let mut group = c.benchmark_group("sample");
    for k in [10_000usize, 100_000, 1_000_000] {
        group.throughput(Throughput::Elements(k as u64));
        for (name, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, k), &k, |b, &k| {
                b.iter(|| sample_with(black_box(&p), k, 1, Mode::Log, execution).unwrap())
            });
        }
    }
    group.finish();
}

fn modes(c: &mut Criterion) {
    let p = prepared(&benchmark_formula());
    let mut group = c.benchmark_group("round_mode");
    for (name, mode) in [("log", Mode::Log), ("rational", Mode::Rational)] {
        group.bench_function(name, |b| {
            b.iter(|| sample_with(black_box(&p), 10_000, 1, mode, Execution::Sequential).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("annotate");
    group.bench_function("log", |b| b.iter(|| annotate(black_box(&p)).unwrap()));
    group.bench_function("rational", |b| b.iter(|| annotate_exact(black_box(&p)).unwrap()));
    group.finish();
}

fn compilation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = random_cnf(&mut rng, 26, 70, 3, 3);
    let order = choose_ordering(&f, OrderingHeuristic::OccurrenceDesc);
    c.bench_function("compile_smooth_26v", |b| {
        b.iter(|| compile(black_box(&f), &order).unwrap().smooth())
    });
}

fn oracle(c: &mut Criterion) {
    let f = benchmark_formula();
    c.bench_function("enumerate_models_20v", |b| b.iter(|| enumerate_models(black_box(&f)).unwrap()));
}

criterion_group!(benches, sampling, modes, compilation, oracle);
criterion_main!(benches);
