use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use branchsys::branching::{doubling_map, example_quadratic};
use branchsys::operators::{default_uv_pairs, random_test_functions, verify_ck_relations};
use branchsys::perron::pf_apply;
use branchsys::sets::{integer, rational};
use branchsys::IntervalUnion;
use branchsys_bench::{densities, o_infinity, standard_2x2};

fn bench_pf_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("pf_apply");
    for cells in [1usize << 10, 1 << 12, 1 << 14] {
        let sys = doubling_map();
        let phi = densities(&sys, cells, 1).remove(0);
        group.bench_with_input(BenchmarkId::new("doubling", cells), &phi, |b, phi| {
            b.iter(|| pf_apply(&sys, black_box(phi), 2).unwrap())
        });
        let quad = example_quadratic(6, integer(3)).unwrap();
        let phi = densities(&quad, cells, 1).remove(0);
        group.bench_with_input(BenchmarkId::new("quadratic", cells), &phi, |b, phi| {
            b.iter(|| pf_apply(&quad, black_box(phi), 3).unwrap())
        });
    }
    group.finish();
}

fn bench_relations(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_ck_relations");
    group.sample_size(10);
    for (name, sys) in [("standard", standard_2x2()), ("o-infinity-8", o_infinity(8))] {
        let fns = random_test_functions(sys.ambient(), 1 << 12, 2, 1, -1.0, 1.0);
        let pairs = default_uv_pairs(sys.matrix(), sys.n_branches());
        group.bench_function(name, |b| {
            b.iter(|| verify_ck_relations(&sys, black_box(&fns), &pairs, 1e-9).unwrap())
        });
    }
    group.finish();
}

fn bench_sets(c: &mut Criterion) {
    let ambient = integer(1);
    let comb = |offset: i64, teeth: i64| {
        IntervalUnion::from_intervals(
            ambient.clone(),
            (0..teeth).map(|k| {
                branchsys::Interval::new(
                    rational(4 * k + offset, 4 * teeth),
                    rational(4 * k + offset + 2, 4 * teeth),
                )
                .unwrap()
            }),
        )
        .unwrap()
    };
    let a = comb(0, 256);
    let b = comb(1, 256);
    c.bench_function("sets/union", |bch| {
        bch.iter(|| black_box(&a).union(black_box(&b)).unwrap())
    });
    c.bench_function("sets/intersect", |bch| {
        bch.iter(|| black_box(&a).intersect(black_box(&b)).unwrap())
    });
    c.bench_function("sets/symmetric_difference", |bch| {
        bch.iter(|| black_box(&a).symmetric_difference(black_box(&b)).unwrap())
    });
}

criterion_group!(benches, bench_pf_apply, bench_relations, bench_sets);
criterion_main!(benches);
