use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use steklov_core::{
    assemble, build_mesh, product_steklov_spectrum, sigma_mu_disk, steklov_spectrum, DomainShape, FiberSpectrum,
    ProductSpec,
};

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble");
    for h in [0.1, 0.05] {
        let mesh = build_mesh(&DomainShape::Disk { radius: 1.0 }, h).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(h), &mesh, |b, m| b.iter(|| assemble(black_box(m)).unwrap()));
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("steklov_spectrum");
    g.sample_size(10);
    for h in [0.1, 0.05] {
        let mesh = build_mesh(&DomainShape::Ellipse { a: 2.0, b: 1.0 }, h).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(h), &mesh, |b, m| {
            b.iter(|| steklov_spectrum(black_box(m), 4).unwrap())
        });
    }
    g.finish();
}

fn shooting(c: &mut Criterion) {
    c.bench_function("sigma_mu_disk k=2 mu=10", |b| b.iter(|| sigma_mu_disk(1.0, black_box(10.0), 2).unwrap()));
    let spec = ProductSpec { m: 2, radius: 1.0, fiber: FiberSpectrum::FlatTorus { l1: 1.0, l2: 1.3 }, num: 50 };
    c.bench_function("product spectrum disk x torus, 50 values", |b| {
        b.iter(|| product_steklov_spectrum(black_box(&spec)).unwrap())
    });
}

criterion_group!(benches, assembly, spectrum, shooting);
criterion_main!(benches);
