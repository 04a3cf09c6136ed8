use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{dvector, DMatrix};
use sfde_core::{
    compute_resolvent, em_solve, sample_path, spectral_abscissa, Atom, DelayMeasure, Segment,
    SystemSpec,
};

fn mixed_measure() -> DelayMeasure {
    let atoms = vec![
        Atom { location: 0.0, weight: DMatrix::from_element(1, 1, -2.0) },
        Atom { location: -1.0, weight: DMatrix::from_element(1, 1, 1.0) },
    ];
    DelayMeasure::new(1.0, 1, atoms, None).unwrap()
}

fn bench_resolvent(c: &mut Criterion) {
    let m = mixed_measure();
    c.bench_function("resolvent table h=2^-8 T=20", |b| {
        b.iter(|| compute_resolvent(&m, 1.0 / 256.0, 20.0).unwrap())
    });
}

fn bench_em(c: &mut Criterion) {
    let sys = SystemSpec::new(mixed_measure(), DMatrix::from_element(1, 1, 1.0), None).unwrap();
    let h = 1.0 / 256.0;
    let path = sample_path(1, h, 0.0, 20.0, 1).unwrap();
    let xi = Segment::from_fn(1.0, h, 1, |u| dvector![u.cos()]).unwrap();
    c.bench_function("em_solve h=2^-8 T=20", |b| {
        b.iter(|| em_solve(&sys, &path, &xi, 0.0, 20.0).unwrap())
    });
}

fn bench_abscissa(c: &mut Criterion) {
    let m = mixed_measure();
    c.bench_function("spectral_abscissa tol=1e-6", |b| {
        b.iter(|| spectral_abscissa(&m, 1e-6).unwrap())
    });
}

criterion_group!(benches, bench_resolvent, bench_em, bench_abscissa);
criterion_main!(benches);
