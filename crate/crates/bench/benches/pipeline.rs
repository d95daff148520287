use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use regbat_bench::{month_scenario, month_trace, walk, MONTH_STEPS};
use regbat_core::rainflow::DEFAULT_TOLERANCE;
use regbat_core::sim::generate_trace;
use regbat_core::*;

fn rainflow(c: &mut Criterion) {
    let profile = walk(1, 100_000);
    let mut g = c.benchmark_group("rainflow");
    g.throughput(Throughput::Elements(profile.len() as u64));
    g.bench_function("batch", |b| {
        b.iter(|| rainflow_count(&extract_extrema(black_box(&profile), DEFAULT_TOLERANCE)))
    });
    g.bench_function("streaming", |b| {
        b.iter(|| stream_count(black_box(&profile).iter().copied(), DEFAULT_TOLERANCE))
    });
    g.finish();
}

fn policy_month(c: &mut Criterion) {
    let sc = month_scenario();
    let trace = month_trace(2);
    let mut g = c.benchmark_group("policy");
    g.sample_size(10);
    g.throughput(Throughput::Elements(MONTH_STEPS as u64));
    g.bench_function("threshold_rollout_month", |b| {
        b.iter_batched(
            || ThresholdPolicy::new(sc.e0, &sc.prices, &sc.battery, &sc.stress).unwrap(),
            |mut p| rollout(&mut p, &trace, &sc.battery, sc.e0).unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.bench_function("simulate_checked_month", |b| {
        b.iter(|| run_simulation(PolicyKind::Threshold, &trace, &sc, None).unwrap())
    });
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut sc = Scenario::default();
    sc.battery.interval = 0.25;
    sc.prices = MarketPrices::new(80.0, 20.0).unwrap();
    let trace = generate_trace(3, 6, 1.0, 0.25).unwrap();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    for k in [5, 9] {
        let cfg = OracleConfig::default().with_levels(k);
        g.bench_function(format!("six_steps_k{k}"), |b| {
            b.iter(|| brute_force_offline(&trace, &sc, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, rainflow, policy_month, oracle);
criterion_main!(benches);
