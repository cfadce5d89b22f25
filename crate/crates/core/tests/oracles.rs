//! The operator sum against its two independent oracles. The sum only
//! describes the push-forward of mass carried by the ranges, so the seeded
//! functions are cut down to the union of ranges first.

use branchsys::branching::{build_standard, doubling_map, example_o_infinity, example_quadratic};
use branchsys::operators::random_test_functions;
use branchsys::perron::{pf_apply, pf_defining_residual, pf_monte_carlo, test_intervals};
use branchsys::sets::integer;
use branchsys::{BranchingSystem, GridFunction, ZeroOneMatrix};

const CELLS: usize = 1 << 12;

fn affine_builtins() -> Vec<BranchingSystem> {
    let m = ZeroOneMatrix::explicit(vec![vec![1, 1], vec![1, 0]]).unwrap();
    vec![
        doubling_map(),
        build_standard(&m, 2).unwrap(),
        example_o_infinity(8).unwrap(),
    ]
}

fn seeded(sys: &BranchingSystem, seed: u64) -> Vec<GridFunction> {
    let support = GridFunction::indicator(&sys.range_union(sys.n_branches()), CELLS).unwrap();
    random_test_functions(sys.ambient(), CELLS, 5, seed, 0.0, 1.0)
        .into_iter()
        .map(|phi| phi.zip_with(&support, |a, b| a * b).unwrap())
        .collect()
}

#[test]
fn defining_property_holds_on_dyadic_intervals() {
    for sys in affine_builtins() {
        for phi in seeded(&sys, 11) {
            for a in test_intervals(sys.ambient(), 8) {
                let r = pf_defining_residual(&sys, &phi, &a, sys.n_branches()).unwrap();
                assert!(r <= 1e-6, "{}: residual {r:e} on {a}", sys.name());
            }
        }
    }
}

fn monte_carlo_gap(sys: &BranchingSystem) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, phi) in seeded(sys, 12).into_iter().enumerate() {
        let est = pf_monte_carlo(sys, &phi, 1_000_000, 100 + k as u64, 256).unwrap();
        let exact = pf_apply(sys, &phi, sys.n_branches()).unwrap().coarsen(256).unwrap();
        worst = worst.max(exact.l1_distance(&est.estimate).unwrap());
    }
    worst
}

#[test]
fn monte_carlo_agrees_with_the_sum() {
    for sys in affine_builtins() {
        let gap = monte_carlo_gap(&sys);
        assert!(gap <= 0.02, "{}: l1 gap {gap}", sys.name());
    }
}

#[test]
fn monte_carlo_agrees_with_the_sum_on_quadratic() {
    let sys = example_quadratic(6, integer(3)).unwrap();
    let gap = monte_carlo_gap(&sys);
    assert!(gap <= 0.02, "l1 gap {gap}");
}
