use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use maglab::catalog;
use maglab::constructor;
use maglab::exec::Exec;
use maglab::flow::IntegratorConfig;
use maglab::mane;
use maglab::sampling::GridSpec;
use maglab::verifier::{self, VerifyConfig};

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn grid_sup(c: &mut Criterion) {
    let sys = constructor::rescaled(&catalog::wavy()).unwrap();
    let grid = GridSpec::default();
    let mut group = c.benchmark_group("grid_rho_sup");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verifier::grid_rho_sup(black_box(&sys), grid, exec))
        });
    }
    group.finish();
}

fn classify(c: &mut Criterion) {
    let sys = constructor::rescaled(&catalog::helix()).unwrap();
    let mut group = c.benchmark_group("classify");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        let cfg = VerifyConfig { exec, ..VerifyConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verifier::classify_with(black_box(&sys), &cfg))
        });
    }
    group.finish();
}

fn lower_bound(c: &mut Criterion) {
    let sys = constructor::rescaled(&catalog::twist()).unwrap();
    let mut group = c.benchmark_group("lower_bound_audit");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        let cfg = VerifyConfig { exec, ..VerifyConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mane::lower_bound_audit(black_box(&sys), 10_000, 7, &cfg).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let sys = constructor::rescaled(&catalog::helix()).unwrap();
    let rs = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
    let integrator = IntegratorConfig::default();
    let mut group = c.benchmark_group("action_sweep");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        let cfg = VerifyConfig { exec, ..VerifyConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mane::action_sweep(black_box(&sys), &rs, &integrator, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, grid_sup, classify, lower_bound, sweep);
criterion_main!(benches);
