use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tn_bench::{capped_block, funded_ledger};
use tn_core::chain::sample_block_time;
use tn_core::cost::optimal_interval;
use tn_core::{run_simulation, CostCurve, Direction, Scenario};

fn ledger(c: &mut Criterion) {
    let mut group = c.benchmark_group("ledger");
    for accounts in [10, 1_000] {
        let (state, addrs) = funded_ledger(accounts, 1);
        let block = capped_block(&addrs, 50, 2);
        group.bench_function(format!("process_block/{accounts}"), |b| {
            b.iter_batched(
                || state.clone(),
                |mut s| s.process_block(black_box(&block)).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn chain(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    c.bench_function("sample_block_time", |b| {
        b.iter(|| sample_block_time(black_box(600_000.0), black_box(1000.0), &mut rng).unwrap())
    });
}

fn interval(c: &mut Criterion) {
    let env = CostCurve::linear(1.0, 0.0, Direction::Increasing).unwrap();
    let sec = CostCurve::power_law(100.0, -1.0, Direction::Decreasing).unwrap();
    c.bench_function("optimal_interval/10k", |b| {
        b.iter(|| optimal_interval(&env, &sec, black_box((0.5, 500.0)), 10_000, 0.0).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let mut s: Scenario = serde_json::from_str(include_str!("../../../scenarios/demo.json")).unwrap();
    s.horizon_epochs = 3;
    s.chain.blocks_per_epoch = 144;
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("demo/3x144", |b| b.iter(|| run_simulation(black_box(&s)).unwrap()));
    group.finish();
}

criterion_group!(benches, ledger, chain, interval, simulation);
criterion_main!(benches);
