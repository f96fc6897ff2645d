use std::collections::BTreeSet;

use blockspec::fixtures::volterra_matrix;
use blockspec::kernel;
use blockspec::{
    make_fixture, oracle_check, point_spectrum, poly_bound_block, power_bound_block, schatten_decision, AlphaSpec,
    BlockMatrix, Complex64, FixtureName, FixtureSpec, OracleOptions, PolyOptions, PowerOptions, SpectrumOptions,
};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn rotation(dim: usize, scale: f64) -> BlockMatrix {
    let mut rows = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        rows[(i + 1) % dim][i] = scale;
    }
    BlockMatrix::from_real_rows(&rows).unwrap()
}

fn dense_kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel");
    for nq in [50, 200] {
        let m = volterra_matrix(1.0, nq).unwrap();
        g.bench_with_input(BenchmarkId::new("spectral_norm", nq), &m, |b, m| {
            b.iter(|| kernel::spectral_norm(black_box(m)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("eigenvalues", nq), &m, |b, m| {
            b.iter(|| kernel::eigenvalues(black_box(m)).unwrap())
        });
    }
    let r = rotation(16, 0.9);
    g.bench_function("resolvent_norm/16", |b| {
        b.iter(|| kernel::resolvent_norm(black_box(&r), Complex64::new(1.5, 0.2)).unwrap())
    });
    g.bench_function("power_norms/16x64", |b| b.iter(|| kernel::power_norms(black_box(&r), 64).unwrap()));
    g.finish();
}

fn decisions(c: &mut Criterion) {
    let mut g = c.benchmark_group("decision");
    g.sample_size(20);
    let alpha = AlphaSpec::List((1..=40).map(f64::from).collect());
    let nil = make_fixture(&FixtureSpec::new(FixtureName::Nilpotent2).with_alpha(alpha), None).unwrap();
    g.bench_function("point_spectrum/nilpotent2x40", |b| {
        b.iter(|| point_spectrum(black_box(&nil), 40, &SpectrumOptions::default()).unwrap())
    });
    g.bench_function("oracle_check/nilpotent2x40", |b| {
        b.iter(|| oracle_check(black_box(&nil), 40, &OracleOptions::default()).unwrap())
    });
    let harmonic = make_fixture(&FixtureSpec::new(FixtureName::HarmonicDiag), None).unwrap();
    let none = BTreeSet::new();
    g.bench_function("schatten/harmonic_p2_n100", |b| {
        b.iter(|| schatten_decision(black_box(&harmonic), 2.0, 100, &none).unwrap())
    });
    let r = rotation(6, 0.8);
    g.bench_function("power_bound_block/rotation6", |b| {
        b.iter(|| power_bound_block(black_box(&r), &PowerOptions::default()).unwrap())
    });
    let jordan = BlockMatrix::from_real_rows(&[vec![0.5, 1.0], vec![0.0, 0.5]]).unwrap();
    g.bench_function("poly_bound_block/jordan2", |b| {
        b.iter(|| poly_bound_block(black_box(&jordan), &PolyOptions::default(), 0).unwrap())
    });
    g.finish();
}

criterion_group!(benches, dense_kernels, decisions);
criterion_main!(benches);
