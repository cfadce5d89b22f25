//! The Perron-Frobenius operator of the coarse map, computed as a sum of
//! squared co-isometries, with independent oracles and the studies built on
//! it.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::branching::{BranchMap, BranchingSystem};
use crate::operators::{coisometry, sample, GridError, GridFunction, OperatorError};
use crate::sets::{integer, to_f64, Interval, IntervalUnion, Rational};

/// Cells below `-NEGATIVE_SLACK` are rejected; smaller negatives are
/// clamped to zero before the square root.
pub const NEGATIVE_SLACK: f64 = 1e-12;
/// Allowed cellwise gap between the squared and the expanded forms.
pub const FORM_AGREEMENT: f64 = 1e-12;
/// Mass outside the instantiated ranges tolerated by the truncation study.
pub const SUPPORT_SLACK: f64 = 1e-9;
/// Grid used to cross-check the matrix representation.
pub const DEFAULT_CELLS: usize = 1 << 12;

#[derive(Debug, Error)]
pub enum PerronError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("negative input {value} in cell {cell}")]
    NegativeInput { cell: usize, value: f64 },
    #[error("asked for {requested} branches, the system has {available}")]
    TooManyBranches { requested: usize, available: usize },
    #[error("sum forms disagree by {gap:e} in cell {cell}")]
    FormMismatch { cell: usize, gap: f64 },
    #[error("input has zero mass")]
    ZeroMass,
    #[error("initial density has L1 norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("no convergence after {} iterations (last step {:e})", errors.len(), errors.last().copied().unwrap_or(f64::NAN))]
    NotConverged { last: Box<GridFunction>, errors: Vec<f64> },
    #[error("row {0} is not finite on the instantiated branches")]
    RowNotFinite(usize),
    #[error("branch {0} has a non-constant derivative")]
    NonconstantDerivative(usize),
    #[error("column {column} disagrees with the operator by {gap:e}")]
    ColumnMismatch { column: usize, gap: f64 },
    #[error("block size {requested} exceeds the {available} branches")]
    BlockTooLarge { requested: usize, available: usize },
    #[error("input carries mass {mass:e} outside the instantiated ranges")]
    SupportViolation { mass: f64 },
    #[error("no truncation indices given")]
    NoIndices,
}

fn check_n(sys: &BranchingSystem, n: usize) -> Result<(), PerronError> {
    if n > sys.n_branches() {
        return Err(PerronError::TooManyBranches {
            requested: n,
            available: sys.n_branches(),
        });
    }
    Ok(())
}

fn check_nonnegative(phi: &GridFunction) -> Result<(), PerronError> {
    match phi.values().iter().position(|&v| v < -NEGATIVE_SLACK || v.is_nan()) {
        Some(cell) => Err(PerronError::NegativeInput {
            cell,
            value: phi.values()[cell],
        }),
        None => Ok(()),
    }
}

fn check_ambient(sys: &BranchingSystem, phi: &GridFunction) -> Result<(), PerronError> {
    if sys.ambient() != phi.ambient() {
        return Err(OperatorError::AmbientMismatch {
            expected: sys.ambient().to_string(),
            found: phi.ambient().to_string(),
        }
        .into());
    }
    Ok(())
}

/// Both forms of `P_F φ` truncated at `n` branches.
#[derive(Debug, Clone, PartialEq)]
pub struct PfForms {
    /// `Σ (S_i* √φ)²`.
    pub squared: GridFunction,
    /// `Σ χ_{D_i} Φ_{f_i} φ∘f_i`.
    pub expanded: GridFunction,
}

impl PfForms {
    pub fn max_gap(&self) -> f64 {
        self.squared
            .values()
            .iter()
            .zip(self.expanded.values())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Computes both forms without asserting agreement.
pub fn pf_forms(sys: &BranchingSystem, phi: &GridFunction, n: usize) -> Result<PfForms, PerronError> {
    check_ambient(sys, phi)?;
    check_n(sys, n)?;
    check_nonnegative(phi)?;
    let root = phi.map(|v| v.max(0.0).sqrt());
    let cells = phi.cells();
    let mut squared = vec![0.0; cells];
    let mut expanded = vec![0.0; cells];
    for b in &sys.branches()[..n] {
        let s = sample(&coisometry(b, root.as_field()), phi.ambient(), cells);
        for (acc, v) in squared.iter_mut().zip(s.values()) {
            *acc += v * v;
        }
        for (k, acc) in expanded.iter_mut().enumerate() {
            if let Some((y, d)) = b.forward_with_derivative(phi.midpoint(k)) {
                *acc += d * phi.lookup(y).max(0.0);
            }
        }
    }
    Ok(PfForms {
        squared: GridFunction::new(phi.ambient().clone(), squared)?,
        expanded: GridFunction::new(phi.ambient().clone(), expanded)?,
    })
}

/// `P_F φ` from the first `n` branches, cross-checked between both forms.
/// Returns the expanded form.
pub fn pf_apply(sys: &BranchingSystem, phi: &GridFunction, n: usize) -> Result<GridFunction, PerronError> {
    let forms = pf_forms(sys, phi, n)?;
    for (cell, (a, b)) in forms.squared.values().iter().zip(forms.expanded.values()).enumerate() {
        let gap = (a - b).abs();
        // relative slack for the large values Φ takes near a critical point
        if gap > FORM_AGREEMENT * b.abs().max(1.0) {
            return Err(PerronError::FormMismatch { cell, gap });
        }
    }
    Ok(forms.expanded)
}

/// `⋃_{i ≤ n} f_i(A ∩ D_i)` with a bound on the endpoint rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Preimage {
    pub set: IntervalUnion,
    /// Sum of the rounding bounds of all inexact endpoints; zero when exact.
    pub endpoint_error: f64,
}

fn branch_image(branch: &BranchMap, a: &IntervalUnion, error: &mut f64) -> Vec<Interval> {
    let mut out = Vec::new();
    for piece in branch.pieces() {
        for iv in a.pieces() {
            let Some(part) = iv.meet(piece.source()) else { continue };
            let (lo, e_lo) = piece.map().forward_exact(part.lo());
            let (hi, e_hi) = piece.map().forward_exact(part.hi());
            let (lo, hi) = if piece.is_increasing() { (lo, hi) } else { (hi, lo) };
            // keep rounded endpoints inside the piece's target
            let t = piece.target();
            let lo = lo.max(t.lo().clone());
            let hi = hi.min(t.hi().clone());
            *error += e_lo + e_hi;
            if let Ok(image) = Interval::new(lo, hi) {
                out.push(image);
            }
        }
    }
    out
}

pub fn preimage_of_interval(sys: &BranchingSystem, a: &IntervalUnion, n: usize) -> Result<Preimage, PerronError> {
    check_n(sys, n)?;
    let ambient = sys.ambient().clone();
    let mut error = 0.0;
    let mut intervals = Vec::new();
    for b in &sys.branches()[..n] {
        let part = a.intersect(b.domain()).map_err(|_| mismatch(sys, a))?;
        intervals.extend(branch_image(b, &part, &mut error));
    }
    let set = IntervalUnion::from_intervals(ambient, intervals).map_err(|_| mismatch(sys, a))?;
    Ok(Preimage {
        set,
        endpoint_error: error,
    })
}

fn mismatch(sys: &BranchingSystem, a: &IntervalUnion) -> PerronError {
    OperatorError::AmbientMismatch {
        expected: sys.ambient().to_string(),
        found: a.ambient().to_string(),
    }
    .into()
}

/// `|∫_A P_F φ − ∫_{F⁻¹(A)} φ|`, both sides by midpoint quadrature.
pub fn pf_defining_residual(
    sys: &BranchingSystem,
    phi: &GridFunction,
    a: &IntervalUnion,
    n: usize,
) -> Result<f64, PerronError> {
    let image = pf_apply(sys, phi, n)?;
    let pre = preimage_of_interval(sys, a, n)?;
    Ok((image.integral_over(a) - phi.integral_over(&pre.set)).abs())
}

/// The intervals `[kL/count, (k+1)L/count)`.
pub fn test_intervals(ambient: &Rational, count: usize) -> Vec<IntervalUnion> {
    let c = integer(count as i64);
    (0..count)
        .map(|k| {
            let lo = ambient * integer(k as i64) / &c;
            let hi = ambient * integer(k as i64 + 1) / &c;
            IntervalUnion::interval(ambient.clone(), lo, hi).expect("inside the ambient")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: GridFunction,
    pub samples: usize,
    /// Set when no samples were drawn and the estimate is identically zero.
    pub empty: bool,
}

/// Pushes `samples` draws from the density `φ/‖φ‖₁` through `F` and
/// histograms them into `bins` cells, rescaled by `‖φ‖₁`.
pub fn pf_monte_carlo(
    sys: &BranchingSystem,
    phi: &GridFunction,
    samples: usize,
    seed: u64,
    bins: usize,
) -> Result<MonteCarloEstimate, PerronError> {
    check_ambient(sys, phi)?;
    check_nonnegative(phi)?;
    let mass = phi.l1_norm();
    if mass <= 0.0 {
        return Err(PerronError::ZeroMass);
    }
    let mut counts = vec![0u64; bins];
    let histogram = GridFunction::zeros(phi.ambient().clone(), bins)?;
    if samples == 0 {
        return Ok(MonteCarloEstimate {
            estimate: histogram,
            samples,
            empty: true,
        });
    }
    let mut cumulative = Vec::with_capacity(phi.cells());
    let mut total = 0.0;
    for v in phi.values() {
        total += v.max(0.0);
        cumulative.push(total);
    }
    let width = phi.width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let u = rng.random::<f64>() * total;
        let cell = cumulative.partition_point(|&c| c <= u).min(phi.cells() - 1);
        let x = (cell as f64 + rng.random::<f64>()) * width;
        if let Some(bin) = histogram.cell_of(sys.eval_f(x)) {
            counts[bin] += 1;
        }
    }
    let scale = mass / (samples as f64 * histogram.width());
    let values = counts.iter().map(|&c| c as f64 * scale).collect();
    Ok(MonteCarloEstimate {
        estimate: GridFunction::new(phi.ambient().clone(), values)?,
        samples,
        empty: false,
    })
}

/// The block `(j, z) ↦ b_z A(z, j)` of `P_F` on `span{χ_{R_i}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRepresentation {
    pub entries: Vec<Vec<Rational>>,
    pub diagonal: Vec<Rational>,
    /// Cells of the grid the columns were checked on; `None` when no aligned
    /// grid of reasonable size exists.
    pub verified_cells: Option<usize>,
    pub max_gap: f64,
}

impl MatrixRepresentation {
    pub fn entries_f64(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|r| r.iter().map(to_f64).collect()).collect()
    }

    /// Rows as comma-separated decimals.
    pub fn to_csv(&self) -> String {
        self.entries_f64()
            .iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Smallest multiple of the breakpoint denominators (relative to `L`) that
/// is at least `floor`, when it stays below `cap`.
fn aligned_cells(sys: &BranchingSystem, floor: usize, cap: usize) -> Option<usize> {
    let mut l = num_bigint::BigInt::one();
    for b in sys.breakpoints() {
        l = l.lcm((b / sys.ambient()).denom());
    }
    let l = l.to_usize().filter(|&l| l <= cap)?;
    let k = floor.div_ceil(l).max(1);
    Some(l * k).filter(|&c| c <= cap)
}

pub fn pf_matrix_representation(sys: &BranchingSystem, n_block: usize) -> Result<MatrixRepresentation, PerronError> {
    let n = sys.n_branches();
    if n_block > n || n_block == 0 {
        return Err(PerronError::BlockTooLarge {
            requested: n_block,
            available: n,
        });
    }
    let matrix = sys.matrix();
    let ambient = sys.ambient().clone();
    let mut diagonal = Vec::with_capacity(n);
    for (z, b) in sys.branches().iter().enumerate().map(|(k, b)| (k + 1, b)) {
        // the column of z expands finitely when D_z is covered by the
        // ranges its row selects among the instantiated branches
        let selected = matrix.row_support_truncated(z, n).into_iter().fold(
            IntervalUnion::empty(ambient.clone()).expect("positive ambient"),
            |acc, j| {
                acc.union(sys.branch(j).expect("j ≤ n").range())
                    .expect("shared ambient")
            },
        );
        if !matrix.row_is_finite(z) && !b.domain().ae_equal(&selected).expect("shared ambient") {
            return Err(PerronError::RowNotFinite(z));
        }
        diagonal.push(b.constant_derivative().ok_or(PerronError::NonconstantDerivative(z))?);
    }
    let entries: Vec<Vec<Rational>> = (1..=n_block)
        .map(|j| {
            (1..=n_block)
                .map(|z| {
                    if matrix.entry(z, j) == 1 {
                        diagonal[z - 1].clone()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();

    let verified_cells = aligned_cells(sys, DEFAULT_CELLS, 1 << 22);
    let mut max_gap: f64 = 0.0;
    if let Some(cells) = verified_cells {
        for z in 1..=n_block {
            let chi = GridFunction::indicator(sys.branch(z).expect("z ≤ n").range(), cells)?;
            let image = pf_apply(sys, &chi, n)?;
            // coefficients on χ_{R_j}, and what is left after removing them
            let mut rest = image.clone();
            for j in 1..=n {
                let r = sys.branch(j).expect("j ≤ n").range();
                let coeff = image.integral_over(r) / to_f64(&r.measure());
                if j <= n_block {
                    max_gap = max_gap.max((coeff - to_f64(&entries[j - 1][z - 1])).abs());
                } else {
                    let expect = if matrix.entry(z, j) == 1 {
                        to_f64(&diagonal[z - 1])
                    } else {
                        0.0
                    };
                    max_gap = max_gap.max((coeff - expect).abs());
                }
                let chi_j = GridFunction::indicator(r, cells)?;
                for (v, c) in rest.values_mut().iter_mut().zip(chi_j.values()) {
                    *v -= coeff * c;
                }
            }
            max_gap = max_gap.max(rest.l1_norm());
            if max_gap > 1e-9 {
                return Err(PerronError::ColumnMismatch {
                    column: z,
                    gap: max_gap,
                });
            }
        }
    }
    Ok(MatrixRepresentation {
        entries,
        diagonal,
        verified_cells,
        max_gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantDensity {
    pub density: GridFunction,
    /// Number of operator applications performed.
    pub iterations: usize,
    /// `‖ρ_{k+1} − ρ_k‖₁` per step.
    pub errors: Vec<f64>,
}

/// Iterates `ρ ↦ P_F ρ / ‖P_F ρ‖₁` until successive iterates are within
/// `tol_l1`.
pub fn invariant_density(
    sys: &BranchingSystem,
    rho0: &GridFunction,
    max_iters: usize,
    tol_l1: f64,
) -> Result<InvariantDensity, PerronError> {
    check_ambient(sys, rho0)?;
    check_nonnegative(rho0)?;
    let norm = rho0.l1_norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(PerronError::NotNormalized(norm));
    }
    let mut rho = rho0.clone();
    let mut errors = Vec::new();
    for k in 1..=max_iters {
        let next = pf_apply(sys, &rho, sys.n_branches())?;
        let mass = next.l1_norm();
        if mass <= 0.0 {
            return Err(PerronError::ZeroMass);
        }
        let next = next.scale(1.0 / mass);
        let err = next.l1_distance(&rho)?;
        errors.push(err);
        rho = next;
        if err <= tol_l1 {
            return Ok(InvariantDensity {
                density: rho,
                iterations: k,
                errors,
            });
        }
    }
    Err(PerronError::NotConverged {
        last: Box::new(rho),
        errors,
    })
}

/// Partial sums `Σ_{i ≤ N}` of the operator and their distance to the sum
/// over all instantiated branches.
#[derive(Debug, Clone, PartialEq)]
pub struct PfReport {
    pub reference_n: usize,
    pub partial_sums: BTreeMap<usize, GridFunction>,
    pub l1_errors: BTreeMap<usize, f64>,
    /// Keyed by the test interval, printed as a set.
    pub defining_property_residuals: Vec<(IntervalUnion, f64)>,
    /// Cells where a partial sum drops below its predecessor.
    pub monotonicity_violations: usize,
}

impl PfReport {
    pub fn errors_nonincreasing(&self) -> bool {
        self.l1_errors
            .values()
            .zip(self.l1_errors.values().skip(1))
            .all(|(a, b)| b <= a)
    }

    pub fn errors_strictly_decreasing(&self) -> bool {
        self.l1_errors
            .values()
            .zip(self.l1_errors.values().skip(1))
            .all(|(a, b)| b < a)
    }

    pub fn max_defining_residual(&self) -> f64 {
        self.defining_property_residuals.iter().fold(0.0, |m, (_, r)| m.max(*r))
    }

    pub fn passed(&self, residual_tol: f64) -> bool {
        self.errors_nonincreasing() && self.monotonicity_violations == 0 && self.max_defining_residual() <= residual_tol
    }

    /// A CSV block per partial sum followed by summary lines.
    pub fn render(&self, residual_tol: f64) -> String {
        let mut out = String::new();
        for (n, g) in &self.partial_sums {
            let _ = writeln!(out, "# partial sum N={n}");
            out.push_str(&g.to_csv_string());
        }
        let _ = writeln!(out, "# l1 error against N={}", self.reference_n);
        out.push_str("N,l1_error\n");
        for (n, e) in &self.l1_errors {
            let _ = writeln!(out, "{n},{e}");
        }
        out.push_str("# defining property\ninterval,residual\n");
        for (a, r) in &self.defining_property_residuals {
            let _ = writeln!(out, "\"{a}\",{r}");
        }
        let verdict = |b: bool| if b { "pass" } else { "fail" };
        let _ = writeln!(out, "errors nonincreasing: {}", verdict(self.errors_nonincreasing()));
        let _ = writeln!(
            out,
            "partial sums nondecreasing: {} ({} violations)",
            verdict(self.monotonicity_violations == 0),
            self.monotonicity_violations
        );
        let _ = writeln!(
            out,
            "defining property within {residual_tol:e}: {} (max {:e})",
            verdict(self.max_defining_residual() <= residual_tol),
            self.max_defining_residual()
        );
        out
    }
}

impl fmt::Display for PfReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, e) in &self.l1_errors {
            writeln!(f, "N={n}: l1 error {e:.6e}")?;
        }
        write!(
            f,
            "monotonicity violations: {}, max defining residual {:.3e}",
            self.monotonicity_violations,
            self.max_defining_residual()
        )
    }
}

pub fn truncation_study(sys: &BranchingSystem, phi: &GridFunction, ns: &[usize]) -> Result<PfReport, PerronError> {
    check_ambient(sys, phi)?;
    check_nonnegative(phi)?;
    let mut ns: Vec<usize> = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let Some(&largest) = ns.last() else {
        return Err(PerronError::NoIndices);
    };
    check_n(sys, largest)?;
    let reference_n = sys.n_branches();
    let covered = sys.range_union(reference_n);
    let outside = phi.integral_over(&covered.complement());
    if outside > SUPPORT_SLACK {
        return Err(PerronError::SupportViolation { mass: outside });
    }
    let reference = pf_apply(sys, phi, reference_n)?;
    let mut partial_sums = BTreeMap::new();
    let mut l1_errors = BTreeMap::new();
    for &n in &ns {
        let s = pf_apply(sys, phi, n)?;
        l1_errors.insert(n, s.l1_distance(&reference)?);
        partial_sums.insert(n, s);
    }
    let sums: Vec<&GridFunction> = partial_sums.values().collect();
    let monotonicity_violations = sums
        .windows(2)
        .map(|w| {
            w[0].values()
                .iter()
                .zip(w[1].values())
                .filter(|(a, b)| **b < **a - NEGATIVE_SLACK)
                .count()
        })
        .sum();
    let defining_property_residuals = test_intervals(sys.ambient(), 8)
        .into_iter()
        .map(|a| {
            let r = pf_defining_residual(sys, phi, &a, reference_n)?;
            Ok((a, r))
        })
        .collect::<Result<_, PerronError>>()?;
    Ok(PfReport {
        reference_n,
        partial_sums,
        l1_errors,
        defining_property_residuals,
        monotonicity_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{build_standard, doubling_map, example_quadratic};
    use crate::matrix::ZeroOneMatrix;
    use crate::sets::rational;

    fn two_x(cells: usize) -> GridFunction {
        GridFunction::from_fn(integer(1), cells, |x| 2.0 * x).unwrap()
    }

    fn standard() -> BranchingSystem {
        let m = ZeroOneMatrix::explicit(vec![vec![1, 1], vec![1, 0]]).unwrap();
        build_standard(&m, 2).unwrap()
    }

    #[test]
    fn doubling_of_one_is_one() {
        let sys = doubling_map();
        let one = GridFunction::from_fn(integer(1), 64, |_| 1.0).unwrap();
        let out = pf_apply(&sys, &one, 2).unwrap();
        assert!(out.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn doubling_of_two_x() {
        let sys = doubling_map();
        let phi = two_x(1 << 10);
        let out = pf_apply(&sys, &phi, 2).unwrap();
        // cell lookup of φ at x/2 and (x+1)/2 costs at most half a cell
        let h = phi.width();
        for (x, v) in out.midpoints().zip(out.values()) {
            assert!((v - (x + 0.5)).abs() <= h / 2.0 + 1e-15);
        }
        let a = IntervalUnion::interval(integer(1), integer(0), rational(1, 2)).unwrap();
        assert!((out.integral_over(&a) - 0.375).abs() < 1e-12);
        assert!(pf_defining_residual(&sys, &phi, &a, 2).unwrap() < 1e-12);
    }

    #[test]
    fn negative_input_rejected_and_roundoff_clamped() {
        let sys = doubling_map();
        let bad = GridFunction::new(integer(1), vec![1.0, -1e-3]).unwrap();
        assert!(matches!(
            pf_apply(&sys, &bad, 2),
            Err(PerronError::NegativeInput { cell: 1, .. })
        ));
        let tiny = GridFunction::new(integer(1), vec![1.0, -1e-14]).unwrap();
        assert!(pf_apply(&sys, &tiny, 2).unwrap().values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn preimages() {
        let sys = doubling_map();
        let a = IntervalUnion::interval(integer(1), integer(0), rational(1, 2)).unwrap();
        let pre = preimage_of_interval(&sys, &a, 2).unwrap();
        assert_eq!(pre.set.to_quadruples().unwrap(), vec![[0, 1, 1, 4], [1, 2, 3, 4]]);
        assert_eq!(pre.endpoint_error, 0.0);
        let empty = IntervalUnion::empty(integer(1)).unwrap();
        assert!(preimage_of_interval(&sys, &empty, 2).unwrap().set.is_empty());

        let sys = standard();
        let r2 = sys.branch(2).unwrap().range().clone();
        let pre = preimage_of_interval(&sys, &r2, 2).unwrap();
        assert_eq!(pre.set.to_quadruples().unwrap(), vec![[3, 2, 2, 1]]);
    }

    #[test]
    fn quadratic_preimage_is_ordered() {
        let sys = example_quadratic(4, integer(2)).unwrap();
        let a = IntervalUnion::interval(integer(2), rational(1, 4), integer(1)).unwrap();
        let pre = preimage_of_interval(&sys, &a, 2).unwrap();
        // f_1(y) = 1 − √y decreasing, f_2(y) = 1 + √y increasing
        assert_eq!(pre.set.to_quadruples().unwrap(), vec![[0, 1, 1, 2], [3, 2, 2, 1]]);
        assert_eq!(pre.endpoint_error, 0.0);
    }

    #[test]
    fn monte_carlo_paths() {
        let sys = doubling_map();
        let zero = GridFunction::zeros(integer(1), 8).unwrap();
        assert!(matches!(
            pf_monte_carlo(&sys, &zero, 10, 1, 4),
            Err(PerronError::ZeroMass)
        ));
        let one = GridFunction::from_fn(integer(1), 256, |_| 1.0).unwrap();
        let est = pf_monte_carlo(&sys, &one, 0, 1, 4).unwrap();
        assert!(est.empty && est.estimate.values().iter().all(|&v| v == 0.0));
        let est = pf_monte_carlo(&sys, &one, 1_000_000, 3, 64).unwrap();
        let target = GridFunction::from_fn(integer(1), 64, |_| 1.0).unwrap();
        assert!(est.estimate.l1_distance(&target).unwrap() <= 0.01);
    }

    #[test]
    fn matrix_representations() {
        let half = rational(1, 2);
        let rep = pf_matrix_representation(&doubling_map(), 2).unwrap();
        assert_eq!(
            rep.entries,
            vec![vec![half.clone(), half.clone()], vec![half.clone(), half.clone()]]
        );
        assert_eq!(rep.to_csv(), "0.5,0.5\n0.5,0.5");
        let rep = pf_matrix_representation(&standard(), 2).unwrap();
        assert_eq!(
            rep.entries,
            vec![vec![half.clone(), integer(1)], vec![half, integer(0)]]
        );
        assert!(rep.verified_cells.is_some() && rep.max_gap < 1e-12);
        let quad = example_quadratic(4, integer(2)).unwrap();
        assert!(matches!(
            pf_matrix_representation(&quad, 2),
            Err(PerronError::NonconstantDerivative(1))
        ));
    }

    #[test]
    fn invariant_density_of_doubling() {
        let sys = doubling_map();
        let rho = invariant_density(&sys, &two_x(1 << 12), 40, 1e-12).unwrap();
        let one = GridFunction::from_fn(integer(1), 1 << 12, |_| 1.0).unwrap();
        assert!(rho.density.l1_distance(&one).unwrap() <= 1e-6);
        let fixed = invariant_density(&sys, &one, 40, 1e-12).unwrap();
        assert_eq!(fixed.iterations, 1);
        assert!(matches!(
            invariant_density(&sys, &zero_mass(), 5, 1e-9),
            Err(PerronError::NotNormalized(_))
        ));
    }

    #[test]
    fn quadratic_invariant_density_satisfies_defining_property() {
        let sys = example_quadratic(4, integer(2)).unwrap();
        let rho0 = GridFunction::from_fn(integer(2), 1 << 12, |_| 0.5).unwrap();
        let rho = match invariant_density(&sys, &rho0, 200, 1e-9) {
            Ok(r) => r.density,
            Err(PerronError::NotConverged { last, .. }) => *last,
            Err(e) => panic!("{e}"),
        };
        for a in test_intervals(sys.ambient(), 8) {
            let r = pf_defining_residual(&sys, &rho, &a, 2).unwrap();
            assert!(r <= 1e-3, "residual {r:e} on {a}");
        }
    }

    fn zero_mass() -> GridFunction {
        GridFunction::zeros(integer(1), 16).unwrap()
    }

    #[test]
    fn truncation_on_doubling() {
        let sys = doubling_map();
        let phi = two_x(256);
        let report = truncation_study(&sys, &phi, &[1, 2]).unwrap();
        let r2 = sys.branch(2).unwrap().range();
        assert!((report.l1_errors[&1] - phi.integral_over(r2)).abs() < 1e-12);
        assert_eq!(report.l1_errors[&2], 0.0);
        assert_eq!(report.monotonicity_violations, 0);
        assert!(report.passed(1e-10));
    }

    #[test]
    fn truncation_rejects_uncovered_mass() {
        let sys = standard();
        let phi = GridFunction::from_fn(integer(4), 64, |x| if x < 1.0 { 1.0 } else { 0.0 }).unwrap();
        assert!(matches!(
            truncation_study(&sys, &phi, &[1, 2]),
            Err(PerronError::SupportViolation { .. })
        ));
    }
}
