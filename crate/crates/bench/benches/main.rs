use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gar_core::baseline::SkewT;
use gar_core::methods::{fit_new_tail, fit_old, new_kernel, NewMethodConfig};
use gar_core::tail_index::default_threshold;
use gar_core::threshold::default_grid;
use gar_core::{
    extreme_quantile, fit_tail_index, quantile_regression, sample_dataset, select_threshold, DgpSpec,
    PredictorResponsePairs, SkewTParams, TailSide,
};

fn pairs(n: usize) -> PredictorResponsePairs {
    sample_dataset(&DgpSpec::quarter_ahead(), n, 7).expect("simulated sample")
}

fn skewt(c: &mut Criterion) {
    let mut g = c.benchmark_group("skewt");
    for (name, alpha, nu) in [("mild", 0.5, 8.0), ("heavy", -3.0, 2.5), ("near_normal", 1.0, 150.0)] {
        let d = SkewT::new(SkewTParams::new(1.0, 2.0, alpha, nu).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("pdf", name), &d, |b, d| b.iter(|| d.pdf(black_box(0.3))));
        g.bench_with_input(BenchmarkId::new("cdf", name), &d, |b, d| {
            b.iter(|| d.cdf(black_box(-4.0)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("quantile", name), &d, |b, d| {
            b.iter(|| d.quantile(black_box(0.01)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("shortfall", name), &d, |b, d| {
            b.iter(|| d.expected_tail(black_box(0.05), TailSide::Lower).unwrap())
        });
    }
    g.finish();
}

fn baseline_fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("baseline");
    g.sample_size(20);
    for n in [300, 1200] {
        let p = pairs(n);
        let x0 = p.covariate_means();
        g.bench_with_input(BenchmarkId::new("quantile_regression", n), &p, |b, p| {
            b.iter(|| quantile_regression(p, black_box(0.05)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("skewt_fit", n), &p, |b, p| {
            b.iter(|| fit_old(p, black_box(&x0)).unwrap())
        });
    }
    g.finish();
}

fn tail_index(c: &mut Criterion) {
    let mut g = c.benchmark_group("tail_index");
    for n in [300, 1200, 5000] {
        let p = pairs(n);
        let thr = default_threshold(&p, TailSide::Lower);
        g.bench_with_input(BenchmarkId::new("fit", n), &p, |b, p| {
            b.iter(|| fit_tail_index(p, TailSide::Lower, black_box(thr)).unwrap())
        });
        let cfg = NewMethodConfig::default();
        let fit = fit_new_tail(&p, TailSide::Lower, &cfg).unwrap();
        let spec = new_kernel(&p, &cfg).unwrap();
        let x0 = p.covariate_means();
        g.bench_with_input(BenchmarkId::new("extreme_quantile", n), &p, |b, p| {
            b.iter(|| extreme_quantile(&fit, p, &x0, black_box(0.01), &spec))
        });
    }
    g.finish();
}

fn threshold_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("threshold");
    g.sample_size(20);
    let grid = default_grid(TailSide::Upper);
    for n in [300, 1200] {
        let p = pairs(n);
        g.bench_with_input(BenchmarkId::new("select", n), &p, |b, p| {
            b.iter(|| select_threshold(p, TailSide::Upper, black_box(&grid)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, skewt, baseline_fit, tail_index, threshold_search);
criterion_main!(benches);
