//! Checking the six branching-system conditions, and the sufficient
//! criterion for conditions 4 and 5 in terms of ranges alone.

use std::fmt;

use num_traits::Zero;

use super::BranchingSystem;
use crate::matrix::IndexSet;
use crate::sets::{IntervalUnion, Rational};

/// Bound on `|F(f_i(x)) − x|` accepted by condition 2.
pub const ROUND_TRIP_TOL: f64 = 1e-12;

/// A pair of finite index sets `(U, V)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UvPair {
    pub u: IndexSet,
    pub v: IndexSet,
}

impl UvPair {
    pub fn new(u: IndexSet, v: IndexSet) -> Self {
        UvPair { u, v }
    }
}

impl fmt::Display for UvPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: &IndexSet| s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "U={{{}}} V={{{}}}", show(&self.u), show(&self.v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    /// Branch indices the failure refers to, e.g. the pair `(i, j)`.
    pub indices: Vec<usize>,
    /// Offending measure, when the failure is a measure statement.
    pub measure: Option<Rational>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionVerdict {
    pub condition: u8,
    pub passed: bool,
    pub failures: Vec<Failure>,
    /// Free-form notes, e.g. skipped (U, V) pairs.
    pub notes: Vec<String>,
    /// Numerical figure of merit (condition 2: worst round-trip error).
    pub metric: Option<f64>,
}

impl ConditionVerdict {
    fn new(condition: u8) -> Self {
        ConditionVerdict {
            condition,
            passed: true,
            failures: Vec::new(),
            notes: Vec::new(),
            metric: None,
        }
    }

    fn fail(&mut self, indices: Vec<usize>, measure: Option<Rational>, message: String) {
        self.passed = false;
        self.failures.push(Failure {
            indices,
            measure,
            message,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub system: String,
    pub conditions: Vec<ConditionVerdict>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, number: u8) -> &ConditionVerdict {
        &self.conditions[number as usize - 1]
    }

    pub fn first_failure(&self) -> Option<(u8, &Failure)> {
        self.conditions
            .iter()
            .find_map(|c| c.failures.first().map(|f| (c.condition, f)))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system: {}", self.system)?;
        for c in &self.conditions {
            write!(
                f,
                "condition {}: {}",
                c.condition,
                if c.passed { "pass" } else { "fail" }
            )?;
            if let Some(m) = c.metric {
                write!(f, " (max error {m:e})")?;
            }
            writeln!(f)?;
            for fail in &c.failures {
                writeln!(f, "  - {}", fail.message)?;
            }
            for note in &c.notes {
                writeln!(f, "  · {note}")?;
            }
        }
        writeln!(f, "overall: {}", if self.passed() { "pass" } else { "fail" })
    }
}

fn union_of<'a>(ambient: &Rational, sets: impl Iterator<Item = &'a IntervalUnion>) -> IntervalUnion {
    sets.fold(
        IntervalUnion::empty(ambient.clone()).expect("positive ambient"),
        |acc, s| acc.union(s).expect("shared ambient"),
    )
}

fn tiles(ambient: &Rational, parts: &[IntervalUnion], whole: &IntervalUnion) -> Result<(), String> {
    let total = parts.iter().fold(Rational::zero(), |acc, p| acc + p.measure());
    let union = union_of(ambient, parts.iter());
    if total != union.measure() {
        return Err(format!(
            "pieces overlap in a set of measure {}",
            total - union.measure()
        ));
    }
    let delta = union.symmetric_difference(whole).expect("shared ambient");
    if !delta.measure().is_zero() {
        return Err(format!("pieces cover {union}, declared {whole}"));
    }
    Ok(())
}

/// Checks every condition on the instantiated branches. Condition 5 is
/// checked for each pair in `uv_pairs` whose support `{j : A(U,V,j) = 1}` is
/// finite; other pairs are recorded as vacuous.
pub fn validate(sys: &BranchingSystem, grid_points_per_branch: usize, uv_pairs: &[UvPair]) -> ValidationReport {
    let ambient = sys.ambient();
    let n = sys.n_branches();
    let matrix = sys.matrix();
    let mut conditions = Vec::with_capacity(6);

    // 1: pieces tile D_i and R_i
    let mut c1 = ConditionVerdict::new(1);
    for b in sys.branches() {
        let single = |iter: Vec<crate::sets::Interval>| {
            iter.into_iter()
                .map(|i| IntervalUnion::from_intervals(ambient.clone(), [i]).expect("inside ambient"))
                .collect::<Vec<_>>()
        };
        let sources = single(b.pieces().iter().map(|p| p.source().clone()).collect());
        let targets = single(b.pieces().iter().map(|p| p.target().clone()).collect());
        if let Err(msg) = tiles(ambient, &sources, b.domain()) {
            c1.fail(
                vec![b.index()],
                None,
                format!("branch {} sources vs D_{}: {msg}", b.index(), b.index()),
            );
        }
        if let Err(msg) = tiles(ambient, &targets, b.range()) {
            c1.fail(
                vec![b.index()],
                None,
                format!("branch {} targets vs R_{}: {msg}", b.index(), b.index()),
            );
        }
    }
    conditions.push(c1);

    // 2: F ∘ f_i = id on D_i, sampled
    let mut c2 = ConditionVerdict::new(2);
    let mut worst: f64 = 0.0;
    for b in sys.branches() {
        let per_piece = (grid_points_per_branch / b.pieces().len().max(1)).max(1);
        let mut branch_worst: f64 = 0.0;
        for p in b.pieces() {
            for x in p.source_samples(per_piece) {
                let back = sys.eval_f(p.compiled().forward(x));
                branch_worst = branch_worst.max((back - x).abs());
            }
        }
        if branch_worst > ROUND_TRIP_TOL {
            c2.fail(
                vec![b.index()],
                None,
                format!("branch {}: max |F(f(x)) − x| = {branch_worst:e}", b.index()),
            );
        }
        worst = worst.max(branch_worst);
    }
    c2.metric = Some(worst);
    conditions.push(c2);

    // 3: ranges pairwise null-intersecting
    let mut c3 = ConditionVerdict::new(3);
    for (a, ba) in sys.branches().iter().enumerate() {
        for bb in &sys.branches()[a + 1..] {
            let overlap = ba.range().intersect(bb.range()).expect("shared ambient").measure();
            if !overlap.is_zero() {
                c3.fail(
                    vec![ba.index(), bb.index()],
                    Some(overlap.clone()),
                    format!("measure(R_{} ∩ R_{}) = {overlap}", ba.index(), bb.index()),
                );
            }
        }
    }
    conditions.push(c3);

    // 4: D_i ⊇ R_j when A(i,j) = 1, D_i ∩ R_j null when A(i,j) = 0
    let mut c4 = ConditionVerdict::new(4);
    for bi in sys.branches() {
        for bj in sys.branches() {
            let (i, j) = (bi.index(), bj.index());
            if matrix.entry(i, j) == 1 {
                let m = bj.range().difference(bi.domain()).expect("shared ambient").measure();
                if !m.is_zero() {
                    c4.fail(
                        vec![i, j],
                        Some(m.clone()),
                        format!("pair ({i},{j}): A({i},{j}) = 1 but measure(R_{j} \\ D_{i}) = {m}"),
                    );
                }
            } else {
                let m = bj.range().intersect(bi.domain()).expect("shared ambient").measure();
                if !m.is_zero() {
                    c4.fail(
                        vec![i, j],
                        Some(m.clone()),
                        format!("pair ({i},{j}): A({i},{j}) = 0 but measure(R_{j} ∩ D_{i}) = {m}"),
                    );
                }
            }
        }
    }
    conditions.push(c4);

    // 5: ⋂_U D_u ∩ ⋂_V (X \ D_v) =a.e. ⋃_{A(U,V,j)=1} R_j
    let mut c5 = ConditionVerdict::new(5);
    let space = sys.space();
    for pair in uv_pairs {
        if pair.u.iter().chain(&pair.v).any(|&k| k == 0 || k > n) {
            c5.notes
                .push(format!("{pair}: index beyond the {n} instantiated branches, skipped"));
            continue;
        }
        let support = match matrix.support_uv(&pair.u, &pair.v) {
            Ok(s) => s,
            Err(_) => {
                c5.notes
                    .push(format!("{pair}: A(U,V,·) not finitely supported, vacuous"));
                continue;
            }
        };
        let mut lhs = space.clone();
        for &u in &pair.u {
            lhs = lhs.intersect(sys.branch(u).unwrap().domain()).expect("shared ambient");
        }
        for &v in &pair.v {
            lhs = lhs.difference(sys.branch(v).unwrap().domain()).expect("shared ambient");
        }
        let rhs = union_of(
            ambient,
            support
                .iter()
                .filter(|&&j| j <= n)
                .map(|&j| sys.branch(j).unwrap().range()),
        );
        let delta = lhs.symmetric_difference(&rhs).expect("shared ambient").measure();
        if !delta.is_zero() {
            let mut indices: Vec<usize> = pair.u.iter().copied().collect();
            indices.extend(pair.v.iter().copied());
            c5.fail(
                indices,
                Some(delta.clone()),
                format!("{pair}: sets differ on a set of measure {delta}"),
            );
        }
    }
    conditions.push(c5);

    // 6: derivatives positive and finite on piece interiors
    let mut c6 = ConditionVerdict::new(6);
    for b in sys.branches() {
        let per_piece = (grid_points_per_branch / b.pieces().len().max(1)).max(1);
        let bad = b.pieces().iter().any(|p| {
            let f = p.compiled();
            p.source_samples(per_piece).any(|x| {
                let d = f.forward_derivative(x);
                let di = f.inverse_derivative(f.forward(x));
                !(d > 0.0 && d.is_finite() && di > 0.0 && di.is_finite())
            })
        });
        if bad {
            c6.fail(
                vec![b.index()],
                None,
                format!(
                    "branch {}: a Radon-Nikodym derivative vanishes or blows up inside a piece",
                    b.index()
                ),
            );
        }
    }
    conditions.push(c6);

    ValidationReport {
        system: sys.name().to_string(),
        conditions,
    }
}

/// Outcome of checking the range-only criteria (a), (b), (c).
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    /// (a) ranges pairwise null-intersecting.
    pub disjoint_ranges: bool,
    /// (b) `X =a.e. ⋃ R_j`; `None` when not requested.
    pub covers_space: Option<bool>,
    /// (c) `D_i =a.e. ⋃_{A(i,j)=1} R_j` for every row-finite instantiated row.
    pub domains_match_rows: bool,
    pub rows_checked: usize,
    /// Conditions 4 and 5 follow from the criteria that passed.
    pub implies_condition_4: bool,
    pub implies_condition_5: bool,
    pub notes: Vec<String>,
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |b: bool| if b { "pass" } else { "fail" };
        writeln!(f, "(a) disjoint ranges: {}", verdict(self.disjoint_ranges))?;
        match self.covers_space {
            Some(b) => writeln!(f, "(b) ranges cover X: {}", verdict(b))?,
            None => writeln!(f, "(b) ranges cover X: not checked")?,
        }
        writeln!(
            f,
            "(c) D_i matches row support: {} ({} rows)",
            verdict(self.domains_match_rows),
            self.rows_checked
        )?;
        writeln!(f, "implies condition 4: {}", self.implies_condition_4)?;
        writeln!(f, "implies condition 5: {}", self.implies_condition_5)?;
        for n in &self.notes {
            writeln!(f, "  · {n}")?;
        }
        Ok(())
    }
}

/// Checks the range-only criteria. A failed or unchecked criterion means
/// conditions 4 and 5 are not established this way, not that they fail;
/// [`validate`] checks them directly.
pub fn lemma_check(sys: &BranchingSystem, cover_required: bool) -> LemmaReport {
    let ambient = sys.ambient();
    let n = sys.n_branches();
    let mut notes = Vec::new();

    let mut disjoint = true;
    for (a, ba) in sys.branches().iter().enumerate() {
        for bb in &sys.branches()[a + 1..] {
            if !ba
                .range()
                .intersect(bb.range())
                .expect("shared ambient")
                .measure()
                .is_zero()
            {
                disjoint = false;
                notes.push(format!("R_{} and R_{} overlap", ba.index(), bb.index()));
            }
        }
    }

    let covers = cover_required.then(|| {
        let all = sys.range_union(n);
        let ok = all.ae_equal(&sys.space()).expect("shared ambient");
        if !ok {
            notes.push(format!(
                "⋃R_j = {all} leaves {} uncovered",
                sys.space().difference(&all).unwrap()
            ));
        }
        ok
    });

    let mut rows_ok = true;
    let mut rows_checked = 0;
    let mut infinite_rows = 0;
    for b in sys.branches() {
        let i = b.index();
        if !sys.matrix().row_is_finite(i) {
            infinite_rows += 1;
            continue;
        }
        rows_checked += 1;
        let cols = sys.matrix().row_support_truncated(i, n);
        let union = union_of(ambient, cols.iter().map(|&j| sys.branch(j).unwrap().range()));
        if !union.ae_equal(b.domain()).expect("shared ambient") {
            rows_ok = false;
            notes.push(format!(
                "D_{i} = {} differs from ⋃_(A({i},j)=1) R_j = {union}",
                b.domain()
            ));
        }
    }
    if infinite_rows > 0 {
        notes.push(format!(
            "{infinite_rows} rows with infinitely many ones skipped for (c)"
        ));
    }

    // 4 needs (a) and (c) on every row; 5 additionally needs the cover.
    let all_rows = infinite_rows == 0;
    let implies_4 = disjoint && rows_ok && all_rows;
    let implies_5 = implies_4 && covers == Some(true);
    LemmaReport {
        disjoint_ranges: disjoint,
        covers_space: covers,
        domains_match_rows: rows_ok,
        rows_checked,
        implies_condition_4: implies_4,
        implies_condition_5: implies_5,
        notes,
    }
}
