use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graphcollide::cftp::estimate_moment;
use graphcollide::graph;
use graphcollide::moments::{solve_moment_ode, solve_stationary_recurrence, solve_stationary_recurrence_exact};
use graphcollide::particles::find_independent_set;
use graphcollide::sde::sample_endpoints;
use graphcollide::{FinderConfig, SdeConfig, SimplexPoint};
use graphcollide_bench::{fixture_graphs, stacked};
use num_rational::BigRational;

fn recurrence(c: &mut Criterion) {
    let mut group = c.benchmark_group("stationary_recurrence");
    for g in fixture_graphs() {
        group.bench_with_input(BenchmarkId::new("float", g.label()), &g, |b, g| {
            b.iter(|| solve_stationary_recurrence(g, 1.0, 4).unwrap())
        });
    }
    let g = graph::cycle(4).unwrap();
    let alpha = BigRational::new(1.into(), 4.into());
    group.bench_function("exact/C4", |b| b.iter(|| solve_stationary_recurrence_exact(&g, &alpha, 4).unwrap()));
    group.finish();
}

fn moment_ode(c: &mut Criterion) {
    let g = graph::petersen().unwrap();
    let x = SimplexPoint::uniform(g.vertex_count());
    c.bench_function("moment_ode/Petersen/order3", |b| {
        b.iter(|| solve_moment_ode(&g, &x, 3, &[0.1, 1.0]).unwrap())
    });
}

fn cftp(c: &mut Criterion) {
    let mut group = c.benchmark_group("cftp_estimate");
    group.sample_size(10);
    let g = graph::cycle(8).unwrap();
    for n in [2, 4, 8] {
        let a = stacked(g.vertex_count(), n);
        group.bench_with_input(BenchmarkId::new("C8", n), &a, |b, a| {
            b.iter(|| estimate_moment(&g, a, 1.0, 4096, 1).unwrap())
        });
    }
    group.finish();
}

fn finder(c: &mut Criterion) {
    let mut group = c.benchmark_group("find_independent_set");
    for g in fixture_graphs() {
        let cfg = FinderConfig::new(2 * g.vertex_count() as u64, 9);
        group.bench_with_input(BenchmarkId::from_parameter(g.label()), &g, |b, g| {
            b.iter(|| find_independent_set(g, &cfg).unwrap())
        });
    }
    group.finish();
}

fn sde(c: &mut Criterion) {
    let mut group = c.benchmark_group("sde_endpoints");
    group.sample_size(10);
    let g = graph::cycle(6).unwrap();
    let cfg = SdeConfig::new(&g, 1.0).unwrap().with_dt(1e-3).unwrap();
    let x = SimplexPoint::uniform(6);
    group.bench_function("C6/1000paths", |b| b.iter(|| sample_endpoints(&cfg, &x, 0.5, 1000, 3).unwrap()));
    group.finish();
}

criterion_group!(benches, recurrence, moment_ode, cftp, finder, sde);
criterion_main!(benches);
