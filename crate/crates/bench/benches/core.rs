use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use ctxmatch::estimation::DesignState;
use ctxmatch::gale_shapley::{agent_optimal_matching, gs_round, ProposalState};
use ctxmatch::market::{presets, ArmPreferences};
use ctxmatch::ranking::TopNRanking;
use ctxmatch::{run, Algorithm, RunConfig};

fn gale_shapley(c: &mut Criterion) {
    let n = 8;
    let k = 12;
    let rankings: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..k).map(|j| (i * 5 + j * 7) % k).collect())
        .collect();
    let arms: Vec<Vec<usize>> = (0..k)
        .map(|j| (0..n).map(|i| (i + j) % n).collect())
        .collect();
    let prefs = ArmPreferences::new(arms, n).unwrap();
    c.bench_function("agent_optimal_matching n8 k12", |b| {
        b.iter(|| agent_optimal_matching(black_box(&rankings), &prefs))
    });
    let tops: Vec<TopNRanking> = rankings
        .iter()
        .map(|r| TopNRanking::new(r[..n].to_vec(), k).unwrap())
        .collect();
    let refs: Vec<&TopNRanking> = tops.iter().collect();
    c.bench_function("gs_round n8", |b| {
        b.iter(|| gs_round(black_box(&ProposalState::fresh(n)), &refs, &prefs).unwrap())
    });
}

fn estimation(c: &mut Criterion) {
    let mut ds = DesignState::new(2);
    for s in 0..200 {
        let x = [1.0 + (s % 3) as f64, 0.5 * (s % 5) as f64];
        ds.update(&x, 0.3 * x[0] + 0.7 * x[1], true);
    }
    let feats = [[1.0, 2.0], [2.0, 0.5], [0.3, 0.3]];
    let rows: Vec<&[f64]> = feats.iter().map(|f| f.as_slice()).collect();
    c.bench_function("confidence bands d2 k3", |b| {
        b.iter(|| ds.bands(black_box(&rows), 1_000).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let inst = presets::uniform_gap_basic();
    let cfg = RunConfig::new(Algorithm::Etpgs, 10_000, 1);
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("etpgs uniform-gap-basic 1e4 rounds", |b| {
        b.iter(|| run(&inst, &cfg).unwrap())
    });
    let delta = presets::delta_example(0.05, 10);
    let cfg = RunConfig::new(Algorithm::Ietpgs, 10_000, 1);
    group.bench_function("ietpgs sec4-delta-example 1e4 rounds", |b| {
        b.iter(|| run(&delta, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, gale_shapley, estimation, simulation);
criterion_main!(benches);
