use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ftpath::bounds::{kappa, kappa_min_kernel};
use ftpath::evolution::{evolve_step, EvolutionOptions};
use ftpath::measure::aux_norm;
use ftpath::pairing::pair;
use ftpath::{
    Complex64, CouplingSchedule, CovarianceKernel, MeasureConfig, PotentialModel, SpatialGrid,
    WaveFunction,
};

fn bench_aux_norm(c: &mut Criterion) {
    let mut group = c.benchmark_group("aux_norm");
    group.sample_size(10);
    for n in [2usize, 8, 32] {
        let cfg = MeasureConfig::new(n, 1.0, 3.0, 4.5).with_samples(2_000);
        let kernel = CovarianceKernel::min_kernel(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| aux_norm(black_box(&cfg), &kernel).unwrap())
        });
    }
    group.finish();
}

fn bench_pair(c: &mut Criterion) {
    let mut group = c.benchmark_group("pair_cosine");
    group.sample_size(10);
    let pot = PotentialModel::Cosine {
        amplitude: 1.0,
        frequency: 1.0,
    };
    let sched = CouplingSchedule::Exponential { eps: 0.1 };
    for n in [2usize, 8, 16] {
        let cfg = MeasureConfig::new(n, 1.0, 3.0, 4.5).with_samples(2_000);
        let kernel = CovarianceKernel::min_kernel(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| pair(black_box(&cfg), &kernel, &sched, &pot).unwrap())
        });
    }
    group.finish();
}

fn bench_evolve_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_step");
    let pot = PotentialModel::GaussianBump {
        amplitude: 1.0,
        width: 1.0,
    };
    for log_m in [10u32, 12, 14] {
        let grid = SpatialGrid::new(-100.0, 100.0, 1 << log_m).unwrap();
        let psi = WaveFunction::from_fn(grid, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
        let opts = EvolutionOptions::default();
        group.bench_with_input(
            BenchmarkId::from_parameter(1usize << log_m),
            &log_m,
            |b, _| b.iter(|| evolve_step(black_box(&psi), &pot, 1.0, &opts).unwrap()),
        );
    }
    group.finish();
}

fn bench_kappa(c: &mut Criterion) {
    let mut group = c.benchmark_group("kappa_sum");
    for n in [256usize, 4096] {
        let cfg = MeasureConfig::new(n, 1.0, 3.0, 4.5);
        group.bench_with_input(BenchmarkId::new("min_kernel", n), &n, |b, _| {
            b.iter(|| kappa_min_kernel(black_box(&cfg)).iter().sum::<f64>())
        });
    }
    let n = 256;
    let cfg = MeasureConfig::new(n, 1.0, 3.0, 4.5);
    let kernel = CovarianceKernel::min_kernel(n);
    group.bench_function(BenchmarkId::new("dense", n), |b| {
        b.iter(|| kappa(black_box(&cfg), &kernel).unwrap().iter().sum::<f64>())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_aux_norm,
    bench_pair,
    bench_evolve_step,
    bench_kappa
);
criterion_main!(benches);
