//! Shared fixtures for the benchmarks.

use branchsys::branching::{build_standard, example_o_infinity};
use branchsys::operators::random_test_functions;
use branchsys::{BranchingSystem, GridFunction, ZeroOneMatrix};

pub fn standard_2x2() -> BranchingSystem {
    let m = ZeroOneMatrix::explicit(vec![vec![1, 1], vec![1, 0]]).expect("valid block");
    build_standard(&m, 2).expect("nonzero rows")
}

pub fn o_infinity(n_max: usize) -> BranchingSystem {
    example_o_infinity(n_max).expect("n_max > 0")
}

/// Nonnegative seeded functions on the system's ambient.
pub fn densities(sys: &BranchingSystem, cells: usize, count: usize) -> Vec<GridFunction> {
    random_test_functions(sys.ambient(), cells, count, 7, 0.0, 1.0)
}
