use compreg_bench::replication;
use compreg_core::{fit, ErrorLaw, FitOptions, KernelSpec, Method};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn smoothers(c: &mut Criterion) {
    let (sc, rep) = replication(ErrorLaw::contaminated(0.1, 10.0).unwrap(), 100);
    let spec = KernelSpec::isotropic(sc.h, 2).unwrap();
    let mut group = c.benchmark_group("fit_100_points");
    for method in Method::ALL {
        let options = FitOptions::new(method);
        group.bench_with_input(BenchmarkId::from_parameter(method), &method, |b, _| {
            b.iter(|| fit(black_box(&rep.data), &spec, &options, &rep.prediction_points).unwrap())
        });
    }
    group.finish();
}

fn sample_size(c: &mut Criterion) {
    let mut group = c.benchmark_group("rob1_by_n");
    for n in [100, 400, 1600] {
        let (sc, rep) = replication(ErrorLaw::clean(), n);
        let spec = KernelSpec::isotropic(sc.h, 2).unwrap();
        let options = FitOptions::new(Method::Rob1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| fit(black_box(&rep.data), &spec, &options, &rep.prediction_points).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, smoothers, sample_size);
criterion_main!(benches);
