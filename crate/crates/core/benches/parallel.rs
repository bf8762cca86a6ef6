//! Sequential vs rayon-parallel comparison of the per-record and per-chain
//! workloads. Built only with the `parallel` feature so both paths are
//! available in one binary.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qjoint::ald::QuantileLevel;
use qjoint::dist::draw_inverse_gaussian;
use qjoint::exec::{map_indexed_par, map_indexed_seq};
use qjoint::joint::{run_chain, FitMode};
use qjoint::longitudinal::weight_fc_params;
use qjoint::model::{McmcSettings, ModelSpec};
use qjoint::rng::RngStream;
use qjoint::simulate::{simulate, SimScenario};
use rand::Rng;

fn weight_kernel(c: &mut Criterion) {
    let level = QuantileLevel::new(0.25).unwrap();
    let sigma2 = 0.7;
    let mut rng = RngStream::from_seed(1);
    let residuals: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let block = RngStream::from_seed(2);

    let work = |i: usize| {
        let (mu, lambda) = weight_fc_params(level, sigma2, residuals[i]);
        let mut rng = block.substream(i as u64);
        1.0 / draw_inverse_gaussian(mu, lambda, &mut rng).unwrap()
    };

    let mut group = c.benchmark_group("weight_update_20k");
    group.bench_function(BenchmarkId::new("map", "sequential"), |b| {
        b.iter(|| map_indexed_seq(residuals.len(), work))
    });
    group.bench_function(BenchmarkId::new("map", "parallel"), |b| {
        b.iter(|| map_indexed_par(residuals.len(), work))
    });
    group.finish();
}

fn short_chain(c: &mut Criterion) {
    let scenario = SimScenario {
        n_subjects: 100,
        ..SimScenario::default()
    };
    let (data, _) = simulate(&scenario, 3).unwrap();
    let spec = ModelSpec {
        grid_k: 5,
        mcmc: McmcSettings {
            chain_length: 50,
            burn_in: 10,
            thin: 1,
            seed: 4,
        },
        ..ModelSpec::default()
    };
    let level = QuantileLevel::new(0.5).unwrap();

    let mut group = c.benchmark_group("chain_50_iters_100_subjects");
    group.sample_size(10);
    group.bench_function("quantile_joint", |b| {
        b.iter(|| run_chain(&data, &spec, FitMode::QuantileJoint(level), 5).unwrap())
    });
    group.bench_function("mean_joint", |b| {
        b.iter(|| run_chain(&data, &spec, FitMode::MeanJoint, 5).unwrap())
    });
    group.finish();
}

criterion_group!(benches, weight_kernel, short_chain);
criterion_main!(benches);
