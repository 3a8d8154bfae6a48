use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use polyside::grouping::solve_max_side;
use polyside::oracle::{brute_lp, brute_sfm};
use polyside::schedule::decompose;
use polyside::setfn::{Family, SfmFamily};
use polyside::sfm::{minimize, SfmInstance};
use polyside_bench::{lp_fixture, sfm_fixture};

fn grouping_vs_brute(c: &mut Criterion) {
    let mut group = c.benchmark_group("lp");
    for n in [4, 6, 8] {
        let inst = lp_fixture(Family::Coverage, n);
        group.bench_with_input(BenchmarkId::new("grouping", n), &inst, |b, inst| {
            b.iter(|| solve_max_side(black_box(inst)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("brute", n), &inst, |b, inst| {
            b.iter(|| brute_lp(black_box(inst)).unwrap())
        });
    }
    group.finish();
}

fn sfm_vs_brute(c: &mut Criterion) {
    let mut group = c.benchmark_group("sfm");
    group.sample_size(20);
    for n in [6, 10] {
        let psi = sfm_fixture(SfmFamily::RandomTable, n);
        group.bench_with_input(BenchmarkId::new("grouping", n), &psi, |b, psi| {
            b.iter(|| minimize(&SfmInstance::new(psi.clone())).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("brute", n), &psi, |b, psi| b.iter(|| brute_sfm(psi).unwrap()));
    }
    group.finish();
}

fn decomposition(c: &mut Criterion) {
    let inst = lp_fixture(Family::ConcaveCardinality, 10);
    let sol = solve_max_side(&inst).unwrap();
    c.bench_function("decompose/10", |b| {
        b.iter(|| decompose(inst.f.as_ref(), black_box(&sol.primal.x), &sol.groups).unwrap())
    });
}

criterion_group!(benches, grouping_vs_brute, sfm_vs_brute, decomposition);
criterion_main!(benches);
