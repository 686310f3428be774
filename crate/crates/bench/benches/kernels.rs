use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qcomb::sampler::{random_hermitian, Seed};
use qcomb::subspace::{preimage_under_partial_trace, tilde};
use qcomb::tensor::{link_product, partial_trace, permute};
use qcomb::{AlgebraShape, Factor, FactorLabel, Layout, Subspace};

fn qubits(labels: std::ops::Range<u32>) -> Layout {
    Layout::new(labels.map(|l| Factor::new(l, AlgebraShape::full(2))).collect()).unwrap()
}

fn link(c: &mut Criterion) {
    let mut g = c.benchmark_group("link_product");
    for n in [2u32, 3, 4] {
        // x on 0..2n, y on n..3n, sharing n qubits
        let x = random_hermitian(&qubits(0..2 * n), Seed(1));
        let y = random_hermitian(&qubits(n..3 * n), Seed(2));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| link_product(&x, &y).unwrap())
        });
    }
    g.finish();
}

fn reshuffle(c: &mut Criterion) {
    let x = random_hermitian(&qubits(0..6), Seed(3));
    let order: Vec<FactorLabel> = (0..6).rev().map(FactorLabel).collect();
    c.bench_function("permute/6 qubits", |b| b.iter(|| permute(&x, &order).unwrap()));
    c.bench_function("partial_trace/6 qubits over 3", |b| {
        b.iter(|| partial_trace(&x, &[FactorLabel(0), FactorLabel(2), FactorLabel(4)]).unwrap())
    });
}

fn subspaces(c: &mut Criterion) {
    let mut g = c.benchmark_group("preimage_of_tilde");
    g.sample_size(20);
    for n in [2u32, 3] {
        let l = qubits(0..n);
        let big = qubits(n..n + 1).concat(&l).unwrap();
        let s = Subspace::identity_line(&l);
        g.bench_with_input(BenchmarkId::from_parameter(n + 1), &n, |b, _| {
            b.iter(|| {
                let t = tilde(&s, 1e-9).unwrap();
                preimage_under_partial_trace(&big, &[FactorLabel(n)], &t, 1e-9).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, link, reshuffle, subspaces);
criterion_main!(benches);
