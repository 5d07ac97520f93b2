use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use poleres::engine::{evaluate_total, FilterBank};
use poleres::excitation::{multitone, prony_ss, random_phase_tones, RankSelection};
use poleres::frf::{project_coefficients, GridSpec};
use poleres::oracle::{integrate, IntegratorConfig};
use poleres::LaguerreBasis;
use poleres_bench::{coefficients, sine, times, PARAMS};

fn filter_bank(c: &mut Criterion) {
    let mut g = c.benchmark_group("filter_bank");
    for r in [12, 24] {
        let bank = FilterBank::new(LaguerreBasis::new(2.0, r).unwrap(), &sine(20.0), 0).unwrap();
        let t = times(2000, 0.01);
        g.bench_with_input(BenchmarkId::from_parameter(r), &t, |b, t| {
            b.iter(|| black_box(bank.evaluate(t).unwrap()))
        });
    }
    g.finish();
}

fn response(c: &mut Criterion) {
    let mut g = c.benchmark_group("response");
    g.sample_size(20);
    let coeffs = coefficients(3, 24);
    for len in [20.0, 100.0] {
        let exc = sine(len);
        let t = times((len / 0.01) as usize, 0.01);
        g.bench_with_input(BenchmarkId::new("closed_form", len), &t, |b, t| {
            b.iter(|| black_box(evaluate_total(&coeffs, &exc, 3, t).unwrap()))
        });
        let cfg = IntegratorConfig::rk4(1e-4, len, 0.01);
        g.bench_with_input(BenchmarkId::new("rk4", len), &cfg, |b, cfg| {
            b.iter(|| black_box(integrate(&PARAMS, |t| (std::f64::consts::PI * t).sin(), cfg).unwrap()))
        });
    }
    g.finish();
}

fn projection(c: &mut Criterion) {
    let mut g = c.benchmark_group("projection");
    g.sample_size(10);
    let b = LaguerreBasis::new(2.0, 24).unwrap();
    g.bench_function("order2", |bench| {
        bench.iter(|| black_box(project_coefficients(&PARAMS, GridSpec::LOW_ORDER, &[b, b]).unwrap()))
    });
    let grid = GridSpec::new(0.4, 64).unwrap();
    g.bench_function("order3_desk", |bench| {
        bench.iter(|| black_box(project_coefficients(&PARAMS, grid, &[b, b, b]).unwrap()))
    });
    g.finish();
}

fn prony(c: &mut Criterion) {
    let omegas: Vec<f64> = (0..=20).map(f64::from).collect();
    let (x, _) = multitone(&random_phase_tones(0.2, &omegas, 1), 2000, 0.01).unwrap();
    let mut g = c.benchmark_group("prony");
    g.sample_size(10);
    g.bench_function("rank42", |b| {
        b.iter(|| black_box(prony_ss(&x, RankSelection::Fixed(42)).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, filter_bank, response, projection, prony);
criterion_main!(benches);
