//! Constructors for concrete branching systems.

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::{BranchMap, BranchPiece, BranchingSystem, BuildError, MapKind, Orientation};
use crate::matrix::{MatrixError, ZeroOneMatrix};
use crate::sets::{integer, rational, Interval, IntervalUnion, Rational};

fn iv(lo: Rational, hi: Rational) -> Result<Interval, BuildError> {
    Ok(Interval::new(lo, hi)?)
}

/// `F(x) = 2x mod 1` on `[0, 1)` with inverse branches `x/2` and `(x+1)/2`.
pub fn doubling_map() -> BranchingSystem {
    let ambient = integer(1);
    let whole = || iv(integer(0), integer(1)).unwrap();
    let halves = [(integer(0), rational(1, 2)), (rational(1, 2), integer(1))];
    let branches = halves
        .into_iter()
        .enumerate()
        .map(|(k, (lo, hi))| {
            let piece = BranchPiece::affine_onto(whole(), iv(lo, hi).unwrap()).unwrap();
            BranchMap::from_pieces(k + 1, ambient.clone(), vec![piece]).unwrap()
        })
        .collect();
    BranchingSystem::new("doubling", ambient, branches, ZeroOneMatrix::full_ones(2).unwrap())
        .expect("doubling map is well formed")
}

/// Identity branches on `[0, 1)` and `[1, 2)` paired with the matrix
/// `[[1, 1], [1, 0]]`: every structural condition holds except the one tying
/// `D_i` to the ranges selected by row `i`.
pub fn identity_counterexample() -> BranchingSystem {
    let ambient = integer(2);
    let branches = (0..2)
        .map(|k| {
            let cell = iv(integer(k), integer(k + 1)).unwrap();
            let piece = BranchPiece::affine_onto(cell.clone(), cell).unwrap();
            BranchMap::from_pieces(k as usize + 1, ambient.clone(), vec![piece]).unwrap()
        })
        .collect();
    let matrix = ZeroOneMatrix::explicit(vec![vec![1, 1], vec![1, 0]]).unwrap();
    BranchingSystem::new("identity-counterexample", ambient, branches, matrix)
        .expect("counterexample is structurally well formed")
}

/// The constructive existence recipe on `[0, L)`.
///
/// Range `R_i` sits inside the unit cell `[i, i + 1)`; the cell is split into
/// one subinterval per instantiated one of row `i` (equal lengths for finite
/// rows, lengths `2⁻¹, 2⁻², …` for all-ones rows) and each unit cell `[j, j+1)`
/// with `A(i, j) = 1` is mapped affinely onto its subinterval. For an all-ones
/// row the last `2^{-k}` of the cell stays outside `R_i`.
///
/// `L` is the smallest power of two above `n_max`, so the integer breakpoints
/// align with uniform dyadic grids.
pub fn build_standard(matrix: &ZeroOneMatrix, n_max: usize) -> Result<BranchingSystem, BuildError> {
    let matrix = matrix.with_n_max(n_max).map_err(|e| match e {
        MatrixError::ZeroRow(i) => BuildError::ZeroRow(i),
        other => BuildError::Matrix(other),
    })?;
    let ambient = integer((n_max as u64 + 1).next_power_of_two() as i64);
    let mut branches = Vec::with_capacity(n_max);
    for i in 1..=n_max {
        let cols = matrix.row_support_truncated(i, n_max);
        if cols.is_empty() {
            return Err(BuildError::ZeroRow(i));
        }
        let lengths: Vec<Rational> = if matrix.row_is_finite(i) {
            vec![rational(1, cols.len() as i64); cols.len()]
        } else {
            let mut len = rational(1, 2);
            (0..cols.len())
                .map(|_| {
                    let out = len.clone();
                    len /= integer(2);
                    out
                })
                .collect()
        };
        let mut cursor = integer(i as i64);
        let mut pieces = Vec::with_capacity(cols.len());
        let mut cells = Vec::with_capacity(cols.len());
        for (&j, len) in cols.iter().zip(lengths) {
            let cell = iv(integer(j as i64), integer(j as i64 + 1))?;
            let next = &cursor + len;
            let target = iv(cursor, next.clone())?;
            cursor = next;
            cells.push(cell.clone());
            pieces.push(BranchPiece::affine_onto(cell, target)?);
        }
        let domain = IntervalUnion::from_intervals(ambient.clone(), cells)?;
        let range = IntervalUnion::from_intervals(ambient.clone(), pieces.iter().map(|p| p.target().clone()))?;
        branches.push(BranchMap::new(i, domain, range, pieces)?);
    }
    BranchingSystem::new("standard", ambient, branches, matrix)
}

/// Countably many affine branches of `[0, 1)` onto consecutive slivers
/// accumulating at `1/2`, truncated at `n_max`. All `D_i = [0, 1)`.
pub fn example_o_infinity(n_max: usize) -> Result<BranchingSystem, BuildError> {
    if n_max == 0 {
        return Err(MatrixError::EmptyTruncation.into());
    }
    let ambient = integer(1);
    let count = n_max / 2 + 2;
    // a[k] and b[k] are 1-based: a_1 = 0, a_k = a_{k-1} + 2^{-k}
    let mut a = vec![Rational::zero(); count + 1];
    for k in 2..=count {
        a[k] = &a[k - 1] + Rational::new(One::one(), num_bigint::BigInt::one() << k);
    }
    let b: Vec<Rational> = (0..count)
        .map(|k| {
            if k == 0 {
                Rational::zero()
            } else {
                (&a[k] + &a[k + 1]) / integer(2)
            }
        })
        .collect();
    let mut branches = Vec::with_capacity(n_max);
    for i in 1..=n_max {
        let (lo, hi) = if i.is_odd() {
            let k = i.div_ceil(2);
            (a[k].clone(), b[k].clone())
        } else {
            let k = i / 2;
            (b[k].clone(), a[k + 1].clone())
        };
        let piece = BranchPiece::affine_onto(iv(integer(0), integer(1))?, iv(lo, hi)?)?;
        branches.push(BranchMap::from_pieces(i, ambient.clone(), vec![piece])?);
    }
    BranchingSystem::new("o-infinity", ambient, branches, ZeroOneMatrix::full_ones(n_max)?)
}

/// Quadratic branches on `[0, L)`: `R_i = [i−1, i)`, `D_i = [0, ⌈i/2⌉)`, and
/// `F(x) = ⌈i/2⌉·(x − v_i)²` on `R_i` with vertex `v_i = i` for odd `i`
/// (decreasing side) and `v_i = i − 1` for even `i` (increasing side).
///
/// Only branches whose range fits inside `[0, L)` are instantiated, so the
/// system has `min(n_max, ⌊L⌋)` branches.
pub fn example_quadratic(n_max: usize, ambient: Rational) -> Result<BranchingSystem, BuildError> {
    if n_max == 0 {
        return Err(MatrixError::EmptyTruncation.into());
    }
    let needed = n_max.div_ceil(2);
    if ambient < integer(needed as i64) {
        return Err(BuildError::AmbientTooSmall {
            ambient: ambient.to_string(),
            reason: format!("D_{n_max} = [0, {needed}) must fit"),
        });
    }
    let fit = ambient.floor().to_integer().to_usize().unwrap_or(usize::MAX);
    let count = n_max.min(fit);
    let mut branches = Vec::with_capacity(count);
    for i in 1..=count {
        let coeff = integer(i.div_ceil(2) as i64);
        let (vertex, side) = if i.is_odd() {
            (integer(i as i64), Orientation::Decreasing)
        } else {
            (integer(i as i64 - 1), Orientation::Increasing)
        };
        let source = iv(integer(0), coeff.clone())?;
        let target = iv(integer(i as i64 - 1), integer(i as i64))?;
        let piece = BranchPiece::new(source, target, MapKind::quadratic(coeff, vertex, side))?;
        branches.push(BranchMap::from_pieces(i, ambient.clone(), vec![piece])?);
    }
    BranchingSystem::new("quadratic", ambient, branches, ZeroOneMatrix::staircase(2, count)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::index_set;

    fn quadruples(u: &IntervalUnion) -> Vec<[i64; 4]> {
        u.to_quadruples().unwrap()
    }

    #[test]
    fn standard_two_by_two() {
        let m = ZeroOneMatrix::explicit(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let sys = build_standard(&m, 2).unwrap();
        let f1 = sys.branch(1).unwrap();
        assert_eq!(f1.pieces().len(), 2);
        assert_eq!(f1.pieces()[0].source().to_quadruple().unwrap(), [1, 1, 2, 1]);
        assert_eq!(f1.pieces()[0].target().to_quadruple().unwrap(), [1, 1, 3, 2]);
        assert_eq!(f1.pieces()[1].source().to_quadruple().unwrap(), [2, 1, 3, 1]);
        assert_eq!(f1.pieces()[1].target().to_quadruple().unwrap(), [3, 2, 2, 1]);
        assert!(f1
            .pieces()
            .iter()
            .all(|p| p.constant_derivative() == Some(rational(1, 2))));
        let f2 = sys.branch(2).unwrap();
        assert_eq!(f2.pieces().len(), 1);
        assert_eq!(f2.pieces()[0].source().to_quadruple().unwrap(), [1, 1, 2, 1]);
        assert_eq!(f2.pieces()[0].target().to_quadruple().unwrap(), [2, 1, 3, 1]);
        assert_eq!(f2.constant_derivative(), Some(integer(1)));
        assert_eq!(quadruples(f1.domain()), vec![[1, 1, 3, 1]]);
        assert_eq!(quadruples(f2.domain()), vec![[1, 1, 2, 1]]);
        assert_eq!(sys.ambient(), &integer(4));
    }

    #[test]
    fn standard_full_ones_uses_geometric_split() {
        let sys = build_standard(&ZeroOneMatrix::full_ones(2).unwrap(), 2).unwrap();
        let f1 = sys.branch(1).unwrap();
        assert_eq!(f1.pieces()[0].target().to_quadruple().unwrap(), [1, 1, 3, 2]);
        assert_eq!(f1.pieces()[1].target().to_quadruple().unwrap(), [3, 2, 7, 4]);
        assert_eq!(quadruples(f1.range()), vec![[1, 1, 7, 4]]);
    }

    #[test]
    fn standard_identity() {
        let sys = build_standard(&ZeroOneMatrix::explicit(vec![vec![1]]).unwrap(), 1).unwrap();
        let f1 = sys.branch(1).unwrap();
        assert_eq!(f1.pieces().len(), 1);
        assert_eq!(f1.constant_derivative(), Some(integer(1)));
        assert_eq!(sys.eval_f(1.25), 1.25);
    }

    #[test]
    fn standard_zero_row() {
        let mut supports = std::collections::BTreeMap::new();
        supports.insert(1, index_set([1]));
        supports.insert(2, index_set([5]));
        let m = ZeroOneMatrix::new(crate::matrix::MatrixKind::RowSupports(supports), 2).unwrap();
        assert_eq!(build_standard(&m, 2).unwrap_err(), BuildError::ZeroRow(2));
        let block = ZeroOneMatrix::explicit(vec![vec![1]]).unwrap();
        assert_eq!(build_standard(&block, 2).unwrap_err(), BuildError::ZeroRow(2));
    }

    #[test]
    fn o_infinity_sequences() {
        let sys = example_o_infinity(8).unwrap();
        let r = |i: usize| quadruples(sys.branch(i).unwrap().range())[0];
        assert_eq!(r(1), [0, 1, 1, 8]);
        assert_eq!(r(2), [1, 8, 1, 4]);
        // R_3 = [a_2, b_2) = [1/4, 5/16), R_4 = [b_2, a_3) = [5/16, 3/8)
        assert_eq!(r(3), [1, 4, 5, 16]);
        assert_eq!(r(4), [5, 16, 3, 8]);
        assert_eq!(r(7), [7, 16, 29, 64]);
        assert_eq!(r(8), [29, 64, 15, 32]);
        assert_eq!(sys.branch(1).unwrap().constant_derivative(), Some(rational(1, 8)));
        for b in sys.branches() {
            assert_eq!(quadruples(b.domain()), vec![[0, 1, 1, 1]]);
        }
    }

    #[test]
    fn quadratic_example_sets() {
        let sys = example_quadratic(6, integer(6)).unwrap();
        assert_eq!(sys.n_branches(), 6);
        assert_eq!(quadruples(sys.branch(3).unwrap().domain()), vec![[0, 1, 2, 1]]);
        assert_eq!(quadruples(sys.branch(5).unwrap().domain()), vec![[0, 1, 3, 1]]);
        assert_eq!(sys.matrix().row_support(3), Some(index_set([1, 2])));
        let phi2 = |y: f64| sys.branch(2).unwrap().phi_forward(y);
        for &y in &[0.01, 0.25, 0.5, 0.99] {
            assert!((phi2(y) - 1.0 / (2.0 * y.sqrt())).abs() < 1e-12);
        }
        // F on R_1 is (x − 1)², on R_3 it is 2(x − 3)²
        assert!((sys.eval_f(0.5) - 0.25).abs() < 1e-15);
        assert!((sys.eval_f(2.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadratic_example_truncates_to_ambient() {
        let sys = example_quadratic(6, integer(3)).unwrap();
        assert_eq!(sys.n_branches(), 3);
        assert!(matches!(
            example_quadratic(6, integer(2)),
            Err(BuildError::AmbientTooSmall { .. })
        ));
    }
}
