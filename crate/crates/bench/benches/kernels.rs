use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use qbeat_bench::{experiment_params, two_detector_stream};
use qbeat_core::clickstream::{correlate, CorrelationParams};
use qbeat_core::engine::{DensityMatrix, G2Solver, MasterEquation, TrajectorySimulator};
use qbeat_core::model::build_operators;
use qbeat_core::{Complex64, DetectionConfig, LevelScheme, PulseProtocol};

fn master_rhs(c: &mut Criterion) {
    let p = experiment_params();
    let ops = build_operators(&p, &LevelScheme::simplified(), 1.0).unwrap();
    let eq = MasterEquation::new(&ops);
    let dim = ops.dim();
    let psi: Vec<Complex64> =
        (0..dim).map(|i| Complex64::new(1.0 / (dim as f64).sqrt(), 0.0) * (i as f64).cos()).collect();
    let rho = DensityMatrix::from_pure(&psi);
    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    c.bench_function("master_rhs", |b| b.iter(|| eq.rhs(black_box(rho.as_slice()), 1.0, &mut out)));
}

fn conditional_g2(c: &mut Criterion) {
    let p = experiment_params();
    let solver = G2Solver::new(&p, &LevelScheme::simplified(), &DetectionConfig::from_params(&p)).unwrap();
    let gated = PulseProtocol { width: 0.5e-6, ..PulseProtocol::default() };
    let mut group = c.benchmark_group("conditional_g2");
    group.sample_size(10);
    group.bench_function("1us_gated", |b| b.iter(|| solver.conditional_g2(black_box(&gated), 1e-6, 1.64e-9).unwrap()));
    group.finish();
}

fn correlator(c: &mut Criterion) {
    // 20 kHz per detector for 5 s: 1e5 starts.
    let stream = two_detector_stream(20e3, 5.0, 3);
    let params = CorrelationParams::default();
    c.bench_function("correlate_1e5_starts", |b| b.iter(|| correlate(black_box(&stream), &params).unwrap()));
}

fn trajectory(c: &mut Criterion) {
    let p = experiment_params();
    let sim = TrajectorySimulator::new(
        &p,
        &LevelScheme::simplified(),
        &PulseProtocol::continuous(),
        &DetectionConfig::from_params(&p),
    )
    .unwrap();
    let gated = PulseProtocol { width: 1e-6, ..PulseProtocol::default() };
    let sim_gated =
        TrajectorySimulator::new(&p, &LevelScheme::simplified(), &gated, &DetectionConfig::from_params(&p)).unwrap();
    let mut group = c.benchmark_group("trajectory_100us");
    group.sample_size(10);
    group.bench_function("continuous", |b| {
        b.iter_batched(|| [1u64], |s| sim.run(100e-6, &s).unwrap(), BatchSize::SmallInput)
    });
    group.bench_function("gated", |b| {
        b.iter_batched(|| [1u64], |s| sim_gated.run(100e-6, &s).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, master_rhs, conditional_g2, correlator, trajectory);
criterion_main!(benches);
