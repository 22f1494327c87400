use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gep_bench::{chain, rts24};
use gep_core::clearing::build_clearing_lp;
use gep_core::lp::solve_lp;
use gep_core::*;

fn bench_clearing(c: &mut Criterion) {
    let m = rts24(None);
    let base = ScenarioSet::base(&m);
    let plan = InvestmentPlan::empty(&m);
    let peak = m.load_blocks.len() - 1;
    let lp = build_clearing_lp(&ClearingProblem { model: &m, scenarios: &base, s: 0, b: peak, y: 1, plan: &plan }).lp;

    let mut group = c.benchmark_group("clearing");
    group.bench_function("rts24 peak LP", |b| b.iter(|| solve_lp(black_box(&lp)).unwrap()));
    group.bench_function("rts24 peak clear_market", |b| {
        b.iter(|| {
            clear_market(&ClearingProblem { model: &m, scenarios: &base, s: 0, b: peak, y: 1, plan: &plan }).unwrap()
        })
    });
    let m5 = rts24(Some(5));
    let n1 = enumerate_n_minus_1(&m5).unwrap();
    let plan5 = InvestmentPlan::empty(&m5);
    group.sample_size(10);
    group.bench_function("rts24 N-1 grid, 5 blocks", |b| b.iter(|| clear_grid(&m5, &n1, &plan5).unwrap()));
    group.finish();
}

fn bench_planner(c: &mut Criterion) {
    let (m, sc) = chain(5, 3);
    let space = CandidateSpace::from_model(&m);
    let mut group = c.benchmark_group("planner");
    group.sample_size(10);
    group.bench_function("chain5 oracle", |b| b.iter(|| enumerate_oracle(&m, &sc, &space).unwrap()));
    group.bench_function("chain5 milp build+solve", |b| {
        b.iter(|| build_milp(&m, &sc, &space).unwrap().solve(&BnbOptions::default()).unwrap())
    });
    group.finish();
}

fn bench_scenarios(c: &mut Criterion) {
    let targets = scenario::load_wind_targets(&gep_bench::data_dir("rts24-wind")).unwrap();
    let set = synthesize_correlated_wind(&targets, 200, 1).unwrap();
    let mut group = c.benchmark_group("scenarios");
    group.bench_function("synthesize 200x5", |b| b.iter(|| synthesize_correlated_wind(&targets, 200, 1).unwrap()));
    group.bench_function("decorrelate 200x5", |b| b.iter(|| decorrelate(black_box(&set), 1, 0.1).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_clearing, bench_planner, bench_scenarios);
criterion_main!(benches);
