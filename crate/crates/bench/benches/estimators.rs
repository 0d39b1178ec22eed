use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array1;

use gpc_bench::{position, posterior, problem};
use gpc_core::ais::{ais_estimate, AisConfig, TransitionKernel};
use gpc_core::ep::ep_fit;
use gpc_core::mcmc::{generalized_leapfrog, leapfrog, HmcConfig, RmhmcConfig};
use gpc_core::smc::{rm_estimate, RmConfig};

fn bench_target_evals(c: &mut Criterion) {
    let mut group = c.benchmark_group("target");
    for &n in &[20usize, 50, 100] {
        let t = posterior(n, 7);
        let x = position(n, 7);
        group.bench_with_input(BenchmarkId::new("derivatives", n), &n, |b, _| {
            b.iter(|| black_box(t.derivatives(black_box(&x))))
        });
        group.bench_with_input(BenchmarkId::new("riemann_metric", n), &n, |b, _| {
            b.iter(|| black_box(t.riemann_metric(black_box(&x)).unwrap()))
        });
    }
    group.finish();
}

fn bench_integrators(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrators");
    let n = 50;
    let t = posterior(n, 11);
    let x = position(n, 11);
    let p = Array1::from_elem(n, 0.1);
    let mass = Array1::ones(n);
    group.bench_function("leapfrog_10_steps", |b| {
        b.iter(|| black_box(leapfrog(&t, black_box(&x), &p, 0.05, 10, &mass)))
    });
    let cfg = RmhmcConfig::new(0.05, 10);
    group.bench_function("generalized_leapfrog_10_steps", |b| {
        b.iter(|| black_box(generalized_leapfrog(&t, black_box(&x), &p, &cfg).unwrap()))
    });
    group.finish();
}

fn bench_estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimators");
    group.sample_size(10);
    let (k, y) = problem(20, 13);
    group.bench_function("ep_fit_n20", |b| {
        b.iter(|| black_box(ep_fit(&y, &k, 1e-6, 200).unwrap()))
    });
    group.bench_function("rm_estimate_n20_r200", |b| {
        b.iter(|| {
            let cfg = RmConfig::new(200, 17);
            black_box(rm_estimate(&y, &k, &cfg).unwrap())
        })
    });
    let t = posterior(8, 19);
    group.bench_function("ais_hmc_n8_b20", |b| {
        b.iter(|| {
            let cfg = AisConfig {
                b_count: 20,
                beta_min: 1e-3,
                runs: 8,
                kernel: TransitionKernel::Hmc(HmcConfig::unit_mass(0.1, 10, 8)),
            };
            black_box(ais_estimate(&t, &cfg, 23).unwrap())
        })
    });
    group.finish();
}

criterion_group!(benches, bench_target_evals, bench_integrators, bench_estimators);
criterion_main!(benches);
