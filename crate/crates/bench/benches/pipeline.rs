use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pegreserve_bench::{baseline_streams, calm_roll, replica_config, stressed_roll};
use pegreserve_core::{
    propagate_moments, run_replica, simulate_stream_segment, solve_mpc_roll, EventSource, IntensityPair, PegFeedback,
    PolicyKind, ScenarioId, SweepConfig,
};

fn thinning(c: &mut Criterion) {
    let (r, m) = baseline_streams();
    let source = EventSource::new(1);
    let fb = PegFeedback { zeta: 100.0 };
    c.bench_function("thinning/one_window", |b| {
        b.iter(|| {
            let mut states = IntensityPair::at_baseline(&r, &m, 0.0);
            for k in 0..80u64 {
                let t0 = k as f64 * 0.1;
                states = simulate_stream_segment(&r, &m, fb, |_| 0.05, t0, t0 + 0.1, states, &source, k)
                    .unwrap()
                    .states;
            }
            black_box(states)
        })
    });
}

fn forecast(c: &mut Criterion) {
    let (r, m) = baseline_streams();
    c.bench_function("forecast/72h", |b| {
        b.iter(|| propagate_moments(black_box(300.0), 133.0, &r, &m, PegFeedback { zeta: 100.0 }, |_| 0.1, 72.0, 0.1))
    });
}

fn mpc(c: &mut Criterion) {
    let sweep = SweepConfig::default();
    let calm = calm_roll();
    let stressed = stressed_roll();
    let mut g = c.benchmark_group("mpc_roll");
    g.bench_function("calm", |b| b.iter(|| solve_mpc_roll(black_box(&calm), &sweep, None)));
    g.bench_function("stressed", |b| b.iter(|| solve_mpc_roll(black_box(&stressed), &sweep, None)));
    g.finish();
}

fn replica(c: &mut Criterion) {
    let mut g = c.benchmark_group("replica");
    g.sample_size(10);
    for policy in [PolicyKind::MaxYield, PolicyKind::OptimalWindow] {
        let cfg = replica_config(policy, 10.0);
        g.bench_function(policy.as_str(), |b| {
            b.iter(|| run_replica(&cfg, ScenarioId::SingleShock, policy, 0))
        });
    }
    g.finish();
}

criterion_group!(benches, thinning, forecast, mpc, replica);
criterion_main!(benches);
