use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use ers::bench::BenchSpec;
use ers::par::Execution;
use ers::refine::ratio_loss_grad;
use ers::sampler::{run, SamplerConfig};
use ers::{Domain, GmmProposal};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn proposal(k: usize, d: usize) -> GmmProposal {
    let means = (0..k * d).map(|j| (j % 7) as f64 - 3.0).collect();
    GmmProposal::from_moments(means, vec![1.5; k * d], vec![1.0; k], Domain::unbounded(d)).unwrap()
}

fn log_density(c: &mut Criterion) {
    let spec = BenchSpec::clutter(2, 0.5).unwrap();
    let target = spec.target();
    let g = proposal(8, 2);
    let xs = g.sample(&mut ChaCha8Rng::seed_from_u64(1), 20_000).points;
    let mut group = c.benchmark_group("log_density_20k");
    for exec in MODES {
        group.bench_with_input(BenchmarkId::new("target", format!("{exec:?}")), &exec, |b, &e| {
            b.iter(|| target.log_density_batch(black_box(&xs), e).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("proposal", format!("{exec:?}")), &exec, |b, &e| {
            b.iter(|| g.log_density_batch(black_box(&xs), e))
        });
    }
    group.finish();
}

fn refine_gradient(c: &mut Criterion) {
    let spec = BenchSpec::clutter(2, 0.5).unwrap();
    let target = spec.target();
    let g = proposal(8, 2);
    let xs = g.sample(&mut ChaCha8Rng::seed_from_u64(2), 20_000).points;
    let logf = target.log_density_batch(&xs, Execution::Sequential).unwrap();
    let mut group = c.benchmark_group("ratio_loss_grad_20k");
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &e| {
            b.iter(|| ratio_loss_grad(&g, black_box(&xs), &logf, e))
        });
    }
    group.finish();
}

fn small_run(c: &mut Criterion) {
    let target = BenchSpec::clutter(1, 0.5).unwrap().target();
    let mut group = c.benchmark_group("run_clutter_1d_T1000");
    group.sample_size(10);
    for exec in MODES {
        let cfg = SamplerConfig {
            target_count: 1000,
            seed: 3,
            execution: exec,
            ..SamplerConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| run(&target, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, log_density, refine_gradient, small_run);
criterion_main!(benches);
