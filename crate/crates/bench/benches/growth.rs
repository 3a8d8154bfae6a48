//! Time against size on the families used for slope fitting. Work counters
//! for the same sweep come from `polyside bench`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use polyside::grouping::solve_max_side;
use polyside::setfn::{Family, SfmFamily};
use polyside::sfm::{minimize, SfmInstance};
use polyside_bench::{lp_fixture, sfm_fixture};

fn solve_growth(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve-growth");
    group.sample_size(10);
    for (family, sizes) in [
        (Family::ConcaveCardinality, &[8, 16, 32, 64][..]),
        (Family::CutGraph, &[8, 16, 32][..]),
    ] {
        for &n in sizes {
            let inst = lp_fixture(family, n);
            group.bench_with_input(BenchmarkId::new(family.name(), n), &inst, |b, inst| {
                b.iter(|| solve_max_side(inst).unwrap())
            });
        }
    }
    group.finish();
}

fn sfm_growth(c: &mut Criterion) {
    let mut group = c.benchmark_group("sfm-growth");
    group.sample_size(10);
    for n in [4, 8, 16, 32] {
        let psi = sfm_fixture(SfmFamily::Concave, n);
        group.bench_with_input(BenchmarkId::new("concave", n), &psi, |b, psi| {
            b.iter(|| minimize(&SfmInstance::new(psi.clone())).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, solve_growth, sfm_growth);
criterion_main!(benches);
