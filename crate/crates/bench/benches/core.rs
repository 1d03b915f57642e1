use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pat_bench::{assertion_block, CANDIDATE, NESTED_LITERAL};
use pat_core::econ::{monte_carlo_expected_cost, sweep, tree_cost, EconScenario, ModelEcon, Policy, Split, SweepGrid};
use pat_core::sandbox::minipy::{run_call_here, Budget};
use pat_core::verification::{parse_assertions, Literal, Provenance};

fn literals(c: &mut Criterion) {
    c.bench_function("literal/parse", |b| b.iter(|| Literal::parse(black_box(NESTED_LITERAL)).unwrap()));
    let lit = Literal::parse(NESTED_LITERAL).unwrap();
    c.bench_function("literal/render", |b| b.iter(|| black_box(&lit).render()));
    let block = assertion_block(50);
    c.bench_function("assertions/parse_50", |b| b.iter(|| parse_assertions(black_box(&block), "f", Provenance::Generated)));
}

fn interpreter(c: &mut Criterion) {
    let budget = Budget { fuel: Some(50_000_000), deadline: None, memory: 64 << 20 };
    c.bench_function("minipy/candidate", |b| b.iter(|| run_call_here(black_box(CANDIDATE), "f", "[40]", budget)));
}

fn econ(c: &mut Criterion) {
    let s = EconScenario::new(ModelEcon::new(10.0, 1.0).unwrap(), ModelEcon::new(6.0, 0.3).unwrap(), 3, 0.5, 1.0, 1.0)
        .unwrap();
    c.bench_function("econ/monte_carlo_1e5", |b| {
        b.iter(|| monte_carlo_expected_cost(black_box(&s), Policy::Heterogeneous, 100_000, 7).unwrap())
    });
    let m = ModelEcon::new(5.0, 1.0).unwrap();
    c.bench_function("econ/tree_peel_k1e4", |b| b.iter(|| tree_cost(black_box(5e4), &m, 3, 0.5, Split::Peel)));
    c.bench_function("econ/sweep_default", |b| b.iter(|| sweep(black_box(&SweepGrid::default())).unwrap()));
}

criterion_group!(benches, literals, interpreter, econ);
criterion_main!(benches);
