use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spinboard_bench::{heisenberg_torus, spiral_points};
use spinboard_core::classical_mc::{McState, McSystem};
use spinboard_core::models::Frame;
use spinboard_core::quantum_lab::gibbs_for_model;
use spinboard_core::spinwave::{f_lambda, w_hat, FMode};
use spinboard_core::su2kit::coherent_vector;
use spinboard_core::symbols::{default_degree, quantize_with, sphere_quadrature};
use spinboard_core::torus::{build_torus, enumerate_contours, peierls_sum};
use spinboard_core::{ClassicalConfig, SpinMagnitude, C64};
use std::hint::black_box;

fn coherent(c: &mut Criterion) {
    let pts = spiral_points(64);
    let mut g = c.benchmark_group("coherent_vector");
    for two_s in [1u32, 8, 16] {
        let sp = SpinMagnitude::new(two_s).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(two_s), &sp, |b, &sp| {
            b.iter(|| {
                pts.iter()
                    .map(|&p| coherent_vector(sp, p).amplitudes[0].re)
                    .sum::<f64>()
            })
        });
    }
    g.finish();
}

fn quantization(c: &mut Criterion) {
    let sp = SpinMagnitude::new(4).unwrap();
    let quad = sphere_quadrature(default_degree(sp));
    c.bench_function("quantize_identity_symbol_s2", |b| {
        b.iter(|| quantize_with(|_| C64::new(1.0, 0.0), sp, black_box(&quad)))
    });
}

fn gibbs(c: &mut Criterion) {
    let (_, spec) = heisenberg_torus(0.5, 2).unwrap();
    c.bench_function("gibbs_heisenberg_2x2_half", |b| {
        b.iter(|| gibbs_for_model(black_box(&spec), Frame::Rp, 1.0).unwrap())
    });
}

fn metropolis(c: &mut Criterion) {
    let (_, spec) = heisenberg_torus(1.0, 16).unwrap();
    let mut state = McState::new(McSystem::from_spec(&spec), 2.0, 7)
        .with_config(ClassicalConfig::new(vec![[0.0, 0.0, 1.0]; spec.n_sites()]));
    c.bench_function("metropolis_sweep_16x16", |b| b.iter(|| state.sweep()));
}

fn spinwave(c: &mut Criterion) {
    let w = w_hat(0.3);
    let mut g = c.benchmark_group("f_lambda");
    g.bench_function("integral", |b| {
        b.iter(|| f_lambda(black_box(&w), 1e-6, FMode::Integral).unwrap())
    });
    g.bench_function("lattice_256", |b| {
        b.iter(|| f_lambda(black_box(&w), 1e-3, FMode::Lattice(256)).unwrap())
    });
    g.finish();
}

fn contours(c: &mut Criterion) {
    let geom = build_torus(2, 6, 2).unwrap();
    c.bench_function("enumerate_contours_3x3", |b| {
        b.iter(|| enumerate_contours(black_box(&geom), 0, 4).unwrap().len())
    });
    c.bench_function("peierls_sum_3x3", |b| {
        b.iter(|| peierls_sum(black_box(&geom), 0, 4, 0.05).unwrap())
    });
}

criterion_group!(
    benches,
    coherent,
    quantization,
    gibbs,
    metropolis,
    spinwave,
    contours
);
criterion_main!(benches);
