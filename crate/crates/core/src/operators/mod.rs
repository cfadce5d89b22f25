//! The representation `S_i ↦ π(S_i)` on discretized `L²`, and a numerical
//! check of the Cuntz-Krieger relations.
//!
//! Operator words are built as lazy pullbacks and only sampled at the end.
//! Sampling after every factor would alias cells whenever a branch contracts.

mod grid;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use grid::{field_inner, random_test_functions, sample, Field, GridError, GridFunction};

use crate::branching::{BranchMap, BranchingSystem, UvPair};
use crate::matrix::{index_set, ZeroOneMatrix};
use crate::sets::IntervalUnion;

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("no branch {0}")]
    NoSuchBranch(usize),
    #[error("function lives on [0, {found}), the system on [0, {expected})")]
    AmbientMismatch { expected: String, found: String },
}

fn branch_of(sys: &BranchingSystem, i: usize) -> Result<&BranchMap, OperatorError> {
    sys.branch(i).ok_or(OperatorError::NoSuchBranch(i))
}

fn check_ambient(sys: &BranchingSystem, g: &GridFunction) -> Result<(), OperatorError> {
    if sys.ambient() != g.ambient() {
        return Err(OperatorError::AmbientMismatch {
            expected: sys.ambient().to_string(),
            found: g.ambient().to_string(),
        });
    }
    Ok(())
}

/// `x ↦ χ_{R_i}(x) Φ_{f_i⁻¹}(x)^{1/2} g(F(x))`.
pub fn isometry<'a>(sys: &'a BranchingSystem, branch: &'a BranchMap, g: Field<'a>) -> Field<'a> {
    Arc::new(move |x| {
        let w = branch.phi_inverse(x);
        if w == 0.0 {
            return 0.0;
        }
        w.sqrt() * g(sys.eval_f(x))
    })
}

/// `x ↦ χ_{D_i}(x) Φ_{f_i}(x)^{1/2} g(f_i(x))`.
pub fn coisometry<'a>(branch: &'a BranchMap, g: Field<'a>) -> Field<'a> {
    Arc::new(move |x| match branch.forward_with_derivative(x) {
        Some((y, d)) => d.sqrt() * g(y),
        None => 0.0,
    })
}

/// `S_i S_i*`.
pub fn range_projection<'a>(sys: &'a BranchingSystem, branch: &'a BranchMap, g: Field<'a>) -> Field<'a> {
    isometry(sys, branch, coisometry(branch, g))
}

/// `S_i* S_i`.
pub fn domain_projection<'a>(sys: &'a BranchingSystem, branch: &'a BranchMap, g: Field<'a>) -> Field<'a> {
    coisometry(branch, isometry(sys, branch, g))
}

fn indicator_field<'a>(set: &'a IntervalUnion, g: Field<'a>) -> Field<'a> {
    Arc::new(move |x| if set.contains_f64(x) { g(x) } else { 0.0 })
}

fn difference<'a>(a: Field<'a>, b: Field<'a>) -> Field<'a> {
    Arc::new(move |x| a(x) - b(x))
}

/// `π(S_i)φ` sampled at the midpoints of `φ`'s grid.
pub fn apply_s(sys: &BranchingSystem, i: usize, phi: &GridFunction) -> Result<GridFunction, OperatorError> {
    check_ambient(sys, phi)?;
    let b = branch_of(sys, i)?;
    Ok(sample(&isometry(sys, b, phi.as_field()), phi.ambient(), phi.cells()))
}

/// `π(S_i)*ψ` sampled at the midpoints of `ψ`'s grid.
pub fn apply_s_star(sys: &BranchingSystem, i: usize, psi: &GridFunction) -> Result<GridFunction, OperatorError> {
    check_ambient(sys, psi)?;
    let b = branch_of(sys, i)?;
    Ok(sample(&coisometry(b, psi.as_field()), psi.ambient(), psi.cells()))
}

/// Refinement factor for inner products of pulled-back functions: enough
/// sub-cells that `φ∘F` is constant on each one for affine systems.
pub fn quadrature_refinement(sys: &BranchingSystem) -> usize {
    match sys.max_expansion() {
        Some(e) => (e.ceil().max(1.0) as usize).next_power_of_two(),
        None => 16,
    }
}

fn field_l2(f: &Field<'_>, length: f64, cells: usize) -> f64 {
    field_inner(f, f, length, cells).max(0.0).sqrt()
}

/// `|⟨S_iφ, ψ⟩ − ⟨φ, S_i*ψ⟩|` with both integrals on a grid refined by
/// `refine`.
pub fn adjointness_defect(
    sys: &BranchingSystem,
    i: usize,
    phi: &GridFunction,
    psi: &GridFunction,
    refine: usize,
) -> Result<f64, OperatorError> {
    check_ambient(sys, phi)?;
    check_ambient(sys, psi)?;
    let b = branch_of(sys, i)?;
    let cells = phi.cells().max(psi.cells()) * refine.max(1);
    let len = sys.ambient_f64();
    let lhs = field_inner(&isometry(sys, b, phi.as_field()), &psi.as_field(), len, cells);
    let rhs = field_inner(&phi.as_field(), &coisometry(b, psi.as_field()), len, cells);
    Ok((lhs - rhs).abs())
}

/// `|‖S_iφ‖₂² − ∫_{D_i} φ²|`, the left side on a grid refined by `refine`
/// and the right side exactly for the piecewise-constant `φ`.
pub fn norm_identity_defect(
    sys: &BranchingSystem,
    i: usize,
    phi: &GridFunction,
    refine: usize,
) -> Result<f64, OperatorError> {
    check_ambient(sys, phi)?;
    let b = branch_of(sys, i)?;
    let cells = phi.cells() * refine.max(1);
    let s = isometry(sys, b, phi.as_field());
    let lhs = field_inner(&s, &s, sys.ambient_f64(), cells);
    let rhs = phi.map(|v| v * v).integral_over(b.domain());
    Ok((lhs - rhs).abs())
}

/// Per-branch `(‖S_i*S_iφ − χ_{D_i}φ‖₂, ‖S_iS_i*φ − χ_{R_i}φ‖₂)` at the
/// midpoints of `φ`'s grid.
pub fn projection_defects(sys: &BranchingSystem, phi: &GridFunction) -> Result<Vec<(f64, f64)>, OperatorError> {
    check_ambient(sys, phi)?;
    let len = sys.ambient_f64();
    let n = phi.cells();
    Ok(sys
        .branches()
        .iter()
        .map(|b| {
            let q = difference(
                domain_projection(sys, b, phi.as_field()),
                indicator_field(b.domain(), phi.as_field()),
            );
            let p = difference(
                range_projection(sys, b, phi.as_field()),
                indicator_field(b.range(), phi.as_field()),
            );
            (field_l2(&q, len, n), field_l2(&p, len, n))
        })
        .collect())
}

/// Singletons `U = {i}, V = ∅` for finite rows, and `U = {i}, V = {j}` for
/// `i, j ≤ min(n, 6)` whose support is finite.
pub fn default_uv_pairs(matrix: &ZeroOneMatrix, n: usize) -> Vec<UvPair> {
    let mut out = Vec::new();
    for i in 1..=n {
        if matrix.row_is_finite(i) {
            out.push(UvPair::new(index_set([i]), index_set([])));
        }
    }
    let m = n.min(6);
    for i in 1..=m {
        for j in 1..=m {
            let pair = UvPair::new(index_set([i]), index_set([j]));
            if matrix.support_uv(&pair.u, &pair.v).is_ok() {
                out.push(pair);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationResidual {
    pub relation: u8,
    pub max_residual: f64,
    /// Label of the index pair or `(U, V)` pair attaining the maximum.
    pub worst: Option<String>,
    /// Number of (word, test function) evaluations.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationReport {
    pub tol: f64,
    pub relations: [RelationResidual; 4],
    /// Pairs skipped for relation 4, with the reason.
    pub vacuous: Vec<(UvPair, String)>,
}

impl RelationReport {
    pub fn passed(&self) -> bool {
        self.relations.iter().all(|r| r.max_residual <= self.tol)
    }

    pub fn relation(&self, number: u8) -> &RelationResidual {
        &self.relations[usize::from(number) - 1]
    }
}

impl fmt::Display for RelationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.relations {
            let verdict = if r.max_residual <= self.tol { "pass" } else { "fail" };
            write!(
                f,
                "relation {}: {} max residual {:.3e}",
                r.relation, verdict, r.max_residual
            )?;
            if let Some(w) = &r.worst {
                write!(f, " at {w}")?;
            }
            writeln!(f, " ({} evaluations)", r.evaluations)?;
        }
        for (pair, why) in &self.vacuous {
            writeln!(f, "relation 4 vacuous for {pair}: {why}")?;
        }
        writeln!(f, "tolerance: {:e}", self.tol)?;
        write!(f, "overall: {}", if self.passed() { "pass" } else { "fail" })
    }
}

struct Tracker {
    relation: u8,
    max: f64,
    worst: Option<String>,
    count: usize,
}

impl Tracker {
    fn new(relation: u8) -> Self {
        Tracker {
            relation,
            max: 0.0,
            worst: None,
            count: 0,
        }
    }

    fn record(&mut self, value: f64, label: impl FnOnce() -> String) {
        self.count += 1;
        // NaN should surface as a failure, not vanish in a comparison
        if value > self.max || (value.is_nan() && !self.max.is_nan()) {
            self.max = value;
            self.worst = Some(label());
        }
    }

    fn finish(self) -> RelationResidual {
        RelationResidual {
            relation: self.relation,
            max_residual: self.max,
            worst: self.worst,
            evaluations: self.count,
        }
    }
}

/// Residual norms of the four relations over every instantiated index pair
/// and the given `(U, V)` pairs, for each test function.
pub fn verify_ck_relations(
    sys: &BranchingSystem,
    test_fns: &[GridFunction],
    uv_pairs: &[UvPair],
    tol: f64,
) -> Result<RelationReport, OperatorError> {
    for g in test_fns {
        check_ambient(sys, g)?;
    }
    let n = sys.n_branches();
    let len = sys.ambient_f64();
    let branches = sys.branches();
    let matrix = sys.matrix();

    let mut vacuous = Vec::new();
    let mut words4: Vec<(&UvPair, Vec<usize>)> = Vec::new();
    for pair in uv_pairs {
        if pair.u.iter().chain(&pair.v).any(|&k| k == 0 || k > n) {
            vacuous.push((pair.clone(), format!("index beyond the {n} instantiated branches")));
            continue;
        }
        match matrix.support_uv(&pair.u, &pair.v) {
            Err(_) => vacuous.push((pair.clone(), "support is not finite".to_string())),
            Ok(s) if s.iter().any(|&j| j > n) => vacuous.push((
                pair.clone(),
                format!("support reaches beyond the {n} instantiated branches"),
            )),
            Ok(s) => words4.push((pair, s.into_iter().collect())),
        }
    }

    let mut t = [Tracker::new(1), Tracker::new(2), Tracker::new(3), Tracker::new(4)];
    for (k, phi) in test_fns.iter().enumerate() {
        let cells = phi.cells();
        let norm = |f: Field<'_>| field_l2(&f, len, cells);
        let field = phi.as_field();
        for (a, bi) in branches.iter().enumerate() {
            for (c, bj) in branches.iter().enumerate() {
                let (i, j) = (a + 1, c + 1);
                if i != j {
                    let w = range_projection(sys, bi, range_projection(sys, bj, field.clone()));
                    t[0].record(norm(w), || format!("(i,j)=({i},{j}) test function {k}"));
                }
                if i < j {
                    let ij = domain_projection(sys, bi, domain_projection(sys, bj, field.clone()));
                    let ji = domain_projection(sys, bj, domain_projection(sys, bi, field.clone()));
                    t[1].record(norm(difference(ij, ji)), || {
                        format!("(i,j)=({i},{j}) test function {k}")
                    });
                }
                let pj = range_projection(sys, bj, field.clone());
                let lhs = domain_projection(sys, bi, pj.clone());
                let w: Field<'_> = if matrix.entry(i, j) == 1 {
                    difference(lhs, pj)
                } else {
                    lhs
                };
                t[2].record(norm(w), || format!("(i,j)=({i},{j}) test function {k}"));
            }
        }
        for (pair, support) in &words4 {
            let mut lhs = field.clone();
            for &u in &pair.u {
                lhs = domain_projection(sys, &branches[u - 1], lhs);
            }
            for &v in &pair.v {
                let q = domain_projection(sys, &branches[v - 1], lhs.clone());
                lhs = difference(lhs, q);
            }
            let parts: Vec<Field<'_>> = support
                .iter()
                .map(|&j| range_projection(sys, &branches[j - 1], field.clone()))
                .collect();
            let w: Field<'_> = Arc::new(move |x| lhs(x) - parts.iter().map(|p| p(x)).sum::<f64>());
            t[3].record(norm(w), || format!("{pair} test function {k}"));
        }
    }
    let [a, b, c, d] = t;
    Ok(RelationReport {
        tol,
        relations: [a.finish(), b.finish(), c.finish(), d.finish()],
        vacuous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{build_standard, doubling_map, identity_counterexample};
    use crate::sets::integer;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn doubling_isometry_of_one() {
        let sys = doubling_map();
        let one = GridFunction::from_fn(integer(1), 16, |_| 1.0).unwrap();
        let s1 = apply_s(&sys, 1, &one).unwrap();
        let expect: Vec<f64> = one
            .midpoints()
            .map(|x| if x < 0.5 { 2f64.sqrt() } else { 0.0 })
            .collect();
        assert!(close(s1.values(), &expect, 1e-15));
        let s1_star = apply_s_star(&sys, 1, &one).unwrap();
        assert!(close(s1_star.values(), &[0.5f64.sqrt(); 16], 1e-15));
    }

    #[test]
    fn zero_maps_to_zero() {
        let sys = doubling_map();
        let zero = GridFunction::zeros(integer(1), 8).unwrap();
        assert_eq!(apply_s(&sys, 2, &zero).unwrap(), zero);
        assert_eq!(apply_s_star(&sys, 2, &zero).unwrap(), zero);
    }

    #[test]
    fn standard_s2_kills_its_own_range() {
        let m = ZeroOneMatrix::explicit(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let sys = build_standard(&m, 2).unwrap();
        let chi = GridFunction::indicator(sys.branch(2).unwrap().range(), 64).unwrap();
        let out = apply_s(&sys, 2, &chi).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors_on_bad_inputs() {
        let sys = doubling_map();
        let g = GridFunction::zeros(integer(2), 8).unwrap();
        assert!(matches!(
            apply_s(&sys, 1, &g),
            Err(OperatorError::AmbientMismatch { .. })
        ));
        let g = GridFunction::zeros(integer(1), 8).unwrap();
        assert_eq!(apply_s_star(&sys, 3, &g), Err(OperatorError::NoSuchBranch(3)));
    }

    #[test]
    fn doubling_relations_pass() {
        let sys = doubling_map();
        let fns = random_test_functions(sys.ambient(), 1 << 12, 10, 1, -1.0, 1.0);
        let pairs = default_uv_pairs(sys.matrix(), sys.n_branches());
        let report = verify_ck_relations(&sys, &fns, &pairs, 1e-9).unwrap();
        assert!(report.passed(), "{report}");
        // both rows are full, so the singletons are absent
        assert!(pairs.iter().all(|p| p.v.len() == 1));
    }

    #[test]
    fn counterexample_breaks_relation_three() {
        let sys = identity_counterexample();
        let fns = random_test_functions(sys.ambient(), 256, 3, 5, -1.0, 1.0);
        let pairs = default_uv_pairs(sys.matrix(), sys.n_branches());
        let report = verify_ck_relations(&sys, &fns, &pairs, 1e-9).unwrap();
        assert!(!report.passed());
        assert!(report.relation(3).max_residual > 0.1);
    }

    #[test]
    fn zero_function_has_zero_residuals() {
        let m = ZeroOneMatrix::explicit(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let sys = build_standard(&m, 2).unwrap();
        let zero = GridFunction::zeros(sys.ambient().clone(), 64).unwrap();
        let pairs = default_uv_pairs(sys.matrix(), 2);
        let report = verify_ck_relations(&sys, &[zero], &pairs, 0.0).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn default_pairs_for_finite_rows() {
        let m = ZeroOneMatrix::explicit(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let pairs = default_uv_pairs(&m, 2);
        assert_eq!(pairs.len(), 2 + 4);
        assert_eq!(pairs[0], UvPair::new(index_set([1]), index_set([])));
    }

    #[test]
    fn adjoint_and_norm_identities_on_doubling() {
        let sys = doubling_map();
        let fns = random_test_functions(sys.ambient(), 256, 4, 9, -1.0, 1.0);
        let r = quadrature_refinement(&sys);
        assert_eq!(r, 2);
        for i in 1..=2 {
            assert!(adjointness_defect(&sys, i, &fns[0], &fns[1], r).unwrap() < 1e-12);
            assert!(norm_identity_defect(&sys, i, &fns[2], r).unwrap() < 1e-12);
            for (q, p) in projection_defects(&sys, &fns[3]).unwrap() {
                assert!(q < 1e-12 && p < 1e-12);
            }
        }
    }
}
