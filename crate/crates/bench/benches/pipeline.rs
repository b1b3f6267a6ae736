//! Benchmarks for the four hot paths: steady states across truncation size,
//! resolvent spectra over a frequency grid, the time-domain spectral oracle,
//! and Monte Carlo trajectory ensembles.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use opo_qed::lindblad::MasterEquation;
use opo_qed::oracle::oracle_spectrum;
use opo_qed::spectra::{CorrelationChannel, RegressionSystem};
use opo_qed::trajectories::ensemble_average;
use opo_qed::{preset, SystemParams};

fn grid(omega_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -omega_max + 2.0 * omega_max * i as f64 / (points - 1) as f64)
        .collect()
}

/// Steady-state solve (dense LU of the Liouvillian) as the basis grows.
fn bench_steady_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("steady_state");
    group.sample_size(10);
    for n_max in [2usize, 6, 10, 14] {
        let params = SystemParams::new(1.0, 10.0, 1.0, 1e-3, n_max).expect("params");
        group.bench_with_input(BenchmarkId::from_parameter(n_max), &params, |b, p| {
            let me = MasterEquation::new(*p);
            b.iter(|| black_box(me.steady_state().expect("steady state")));
        });
    }
    group.finish();
}

/// Resolvent spectrum on a 401-point grid at the strong-mixing preset.
fn bench_resolvent_grid(c: &mut Criterion) {
    let params = preset("fig6").expect("preset").params();
    let me = MasterEquation::new(params);
    let system = RegressionSystem::full(&me, CorrelationChannel::FieldNormal).expect("system");
    let omegas = grid(params.default_omega_max(), 401);
    let mut group = c.benchmark_group("resolvent");
    group.sample_size(20);
    group.bench_function("fig6_401pts", |b| {
        b.iter(|| black_box(system.spectrum(&omegas).expect("spectrum")));
    });
    group.finish();
}

/// Time-domain oracle (correlation propagation plus quadrature transform).
fn bench_oracle(c: &mut Criterion) {
    let params = preset("fig2").expect("preset").params();
    let me = MasterEquation::new(params);
    let system = RegressionSystem::full(&me, CorrelationChannel::FieldNormal).expect("system");
    let omegas = grid(params.default_omega_max(), 101);
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("fig2_101pts", |b| {
        b.iter(|| black_box(oracle_spectrum(&system, &omegas).expect("oracle")));
    });
    group.finish();
}

/// Fixed-seed trajectory ensemble at the weak-drive trajectory preset.
fn bench_ensemble(c: &mut Criterion) {
    let params = preset("fig16").expect("preset").params();
    let mut group = c.benchmark_group("trajectories");
    group.sample_size(10);
    group.bench_function("fig16_64traj", |b| {
        b.iter(|| black_box(ensemble_average(&params, 64, 7, 4.0, 0.5).expect("ensemble")));
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_steady_state,
    bench_resolvent_grid,
    bench_oracle,
    bench_ensemble
);
criterion_main!(benches);
