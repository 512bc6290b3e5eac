//! Throughput of the main numerical kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fracnls_bench::{desk_setup, random_field, random_normal_field};
use fracnls_core::dynamics::{cubic_term, step, EffectiveStepper, RhsKind};
use fracnls_core::mourre::{a_band, a_functional_banded, build_setup, check_positive_commutator};
use fracnls_core::paradiff::{lattice_for, quantize_bw};
use fracnls_core::resonance::audit_lower_bounds;
use fracnls_core::symbol::sym_transport;
use num_complex::Complex64;
use std::hint::black_box;

fn dynamics(c: &mut Criterion) {
    let mut g = c.benchmark_group("dynamics");
    for k in [64usize, 256, 1024] {
        let u = random_field(k, 1, 0.1);
        g.bench_with_input(BenchmarkId::new("cubic_term", k), &u, |b, u| b.iter(|| cubic_term(black_box(u))));
        g.bench_with_input(BenchmarkId::new("ifrk4_step", k), &u, |b, u| {
            b.iter(|| step(RhsKind::Renormalized, black_box(u), 0.5, 1e-3))
        });
    }
    g.finish();
}

fn effective(c: &mut Criterion) {
    let z = Complex64::new(0.3, 0.0);
    let mut g = c.benchmark_group("effective_step");
    for k in [256usize, 1024, 4224] {
        let stepper = EffectiveStepper::new(z, z, 0.5, k, 1e-3).unwrap();
        let zeta = random_normal_field(k, 2);
        g.bench_with_input(BenchmarkId::from_parameter(k), &zeta, |b, zeta| b.iter(|| stepper.step(black_box(zeta))));
    }
    g.finish();
}

fn quantization(c: &mut Criterion) {
    let z1 = Complex64::new(0.3, 0.1);
    let zm1 = Complex64::new(0.2, -0.2);
    let mut g = c.benchmark_group("quantize_bw");
    for k in [64usize, 128] {
        let (nx, xm) = lattice_for(k);
        let sym = sym_transport(z1, zm1, nx, xm);
        g.bench_with_input(BenchmarkId::from_parameter(k), &sym, |b, sym| b.iter(|| quantize_bw(black_box(sym), k)));
    }
    g.finish();
}

fn mourre(c: &mut Criterion) {
    let (data, setup) = desk_setup();
    let band = a_band(&setup, 256);
    let zeta = data.normal_part();
    c.bench_function("a_functional_banded_256", |b| b.iter(|| a_functional_banded(&band, black_box(&zeta))));
    let mut g = c.benchmark_group("mourre_setup");
    g.sample_size(10);
    let z = Complex64::new(0.3, 0.0);
    g.bench_function("build_and_check_217", |b| {
        b.iter(|| check_positive_commutator(&build_setup(0.5, 0.05, 0.5, 7.0, z, z, 217).unwrap()).unwrap())
    });
    g.finish();
}

fn resonance(c: &mut Criterion) {
    let mut g = c.benchmark_group("audit_lower_bounds");
    g.sample_size(10);
    for j in [20i64, 60] {
        g.bench_with_input(BenchmarkId::from_parameter(j), &j, |b, &j| b.iter(|| audit_lower_bounds(j, 0.5).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, dynamics, effective, quantization, mourre, resonance);
criterion_main!(benches);
