use std::hint::black_box;

use agdcert::agd::{make_schedule, run_agd};
use agdcert::{
    bregman_prox, lipschitz, project, solve_pep, sym_eig, FeasibleSet, Geometry, PepInstance,
    PepMode, PepOptions, ScheduleName,
};
use agdcert_bench::{box_qp, test_matrix};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn eig(c: &mut Criterion) {
    let mut g = c.benchmark_group("sym_eig");
    for n in [12, 36, 72] {
        let m = test_matrix(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| sym_eig(black_box(m)).unwrap())
        });
    }
    g.finish();
}

fn prox(c: &mut Criterion) {
    let n = 50;
    let point: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let simplex = FeasibleSet::simplex(n).unwrap();
    c.bench_function("project_simplex_50", |b| {
        b.iter(|| project(&simplex, black_box(&point)).unwrap())
    });

    let geom = Geometry::entropy_simplex(n).unwrap();
    let anchor = vec![1.0 / n as f64; n];
    c.bench_function("entropy_prox_50", |b| {
        b.iter(|| bregman_prox(&geom, black_box(&point), &anchor, 2.0).unwrap())
    });
}

fn agd(c: &mut Criterion) {
    let (obj, geom, x0) = box_qp(20);
    let l = lipschitz(&obj, geom.norm).unwrap().value;
    let sched = make_schedule(ScheduleName::S1, l, 100).unwrap();
    c.bench_function("agd_box_qp_20d_100_steps", |b| {
        b.iter(|| run_agd(&obj, &geom, &sched, black_box(&x0), 100).unwrap())
    });
}

fn pep(c: &mut Criterion) {
    let inst = PepInstance::standard(3).unwrap();
    let opts = PepOptions::default();
    let mut g = c.benchmark_group("pep_n3");
    g.sample_size(10);
    for mode in [PepMode::General, PepMode::Conjecture] {
        g.bench_function(mode.as_str(), |b| {
            b.iter(|| solve_pep(black_box(&inst), mode, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, eig, prox, agd, pep);
criterion_main!(benches);
