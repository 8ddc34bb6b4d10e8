use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tickvol::bessel::log_bessel_i;
use tickvol::gasfilter::{filter, loglik_mean};
use tickvol::simulator::{simulate_day, SimConfig};
use tickvol::smoothing::fit_spline;
use tickvol::ziskellam::{evaluate, log_pmf, ZiSkellamParams};
use tickvol::{ModelInput, ModelParams, Variant};

fn bessel(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_bessel_i");
    for x in [0.5, 12.0, 80.0, 900.0] {
        g.bench_with_input(BenchmarkId::from_parameter(x), &x, |b, &x| {
            b.iter(|| {
                (0..20)
                    .map(|n| log_bessel_i(n, black_box(x)).unwrap())
                    .sum::<f64>()
            })
        });
    }
    g.finish();
}

fn pmf(c: &mut Criterion) {
    let p = ZiSkellamParams::new(-0.4, 1.3, 0.12).unwrap();
    c.bench_function("log_pmf y in -10..10", |b| {
        b.iter(|| (-10..10).map(|y| log_pmf(y, black_box(&p))).sum::<f64>())
    });
    c.bench_function("evaluate y in -10..10", |b| {
        b.iter(|| {
            (-10..10)
                .map(|y| evaluate(y, black_box(&p)).score_mu)
                .sum::<f64>()
        })
    });
}

fn proposed_input(n: usize) -> (ModelParams, ModelInput) {
    let params = ModelParams {
        theta: -0.35,
        omega: 0.0,
        phi: 0.97,
        alpha: 0.19,
        pi: 0.13,
        ..Default::default()
    };
    let spec = Variant::Proposed.spec().without_adjustments();
    let day = simulate_day(&SimConfig::new(spec, params, n + 1, 1)).unwrap();
    (params, ModelInput::unadjusted(day.price_changes))
}

fn gas_filter(c: &mut Criterion) {
    let spec = Variant::Proposed.spec().without_adjustments();
    let (params, input) = proposed_input(50_000);
    let mut g = c.benchmark_group("filter 50k");
    g.sample_size(20);
    g.bench_function("paths", |b| {
        b.iter(|| filter(&spec, &params, black_box(&input)).unwrap())
    });
    g.bench_function("loglik only", |b| {
        b.iter(|| loglik_mean(&spec, &params, black_box(&input)).unwrap())
    });
    g.finish();
}

fn spline(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_spline");
    g.sample_size(20);
    for n in [500, 5_000, 50_000] {
        let x: Vec<f64> = (0..n)
            .map(|i| 34_200.0 + 23_400.0 * i as f64 / n as f64)
            .collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, t)| {
                1.0 + 0.3 * (t / 4000.0).cos() + 0.2 * ((i * 7919 % 101) as f64 / 50.0 - 1.0)
            })
            .collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| fit_spline(black_box(&x), black_box(&y), None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bessel, pmf, gas_filter, spline);
criterion_main!(benches);
