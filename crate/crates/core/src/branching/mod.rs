//! Branch maps `f_i: D_i → R_i`, the coarse map `F`, and the branching
//! systems they form.

mod builders;
mod piece;
mod validate;

pub use builders::{build_standard, doubling_map, example_o_infinity, example_quadratic, identity_counterexample};
pub use piece::{
    chain_rule_residual, reciprocal_residual, BranchPiece, CompiledMap, MapKind, Orientation, PieceError, ROUNDING_BITS,
};
pub use validate::{
    lemma_check, validate, ConditionVerdict, Failure, LemmaReport, UvPair, ValidationReport, ROUND_TRIP_TOL,
};

use num_traits::Zero;
use thiserror::Error;

use crate::matrix::{MatrixError, ZeroOneMatrix};
use crate::sets::{integer, to_f64, IntervalUnion, Rational, SetError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Piece(#[from] PieceError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("row {0} has no ones among the instantiated columns")]
    ZeroRow(usize),
    #[error("branch at position {position} carries index {index}; indices must run 1, 2, …")]
    BadIndex { position: usize, index: usize },
    #[error("matrix truncation {matrix} does not match the {branches} instantiated branches")]
    BranchCountMismatch { matrix: usize, branches: usize },
    #[error("branch {0}: a piece lies outside its declared domain or range")]
    PieceOutsideBranch(usize),
    #[error("a system needs at least one branch")]
    NoBranches,
    #[error("ambient length {ambient} is too small: {reason}")]
    AmbientTooSmall { ambient: String, reason: String },
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EvalError {
    #[error("branch {branch} is not defined at x = {x}")]
    OutOfDomain { branch: usize, x: f64 },
    #[error("no branch with index {0}")]
    NoSuchBranch(usize),
    #[error("x = {0} lies outside the ambient space")]
    OutOfAmbient(f64),
}

/// One `f_i: D_i → R_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchMap {
    index: usize,
    domain: IntervalUnion,
    range: IntervalUnion,
    pieces: Vec<BranchPiece>,
}

impl BranchMap {
    /// Branch with explicitly declared domain and range. Whether the pieces
    /// actually tile them is a validation question, not a construction one.
    pub fn new(
        index: usize,
        domain: IntervalUnion,
        range: IntervalUnion,
        mut pieces: Vec<BranchPiece>,
    ) -> Result<Self, BuildError> {
        if domain.ambient() != range.ambient() {
            return Err(SetError::AmbientMismatch {
                left: domain.ambient().to_string(),
                right: range.ambient().to_string(),
            }
            .into());
        }
        let ambient = domain.ambient();
        for p in &pieces {
            if p.source().lo() < &Rational::zero()
                || p.source().hi() > ambient
                || p.target().lo() < &Rational::zero()
                || p.target().hi() > ambient
            {
                return Err(BuildError::PieceOutsideBranch(index));
            }
        }
        pieces.sort_by(|a, b| a.source().lo().cmp(b.source().lo()));
        Ok(BranchMap {
            index,
            domain,
            range,
            pieces,
        })
    }

    /// Domain and range taken as the unions of the piece sources and targets.
    pub fn from_pieces(index: usize, ambient: Rational, pieces: Vec<BranchPiece>) -> Result<Self, BuildError> {
        let domain = IntervalUnion::from_intervals(ambient.clone(), pieces.iter().map(|p| p.source().clone()))?;
        let range = IntervalUnion::from_intervals(ambient, pieces.iter().map(|p| p.target().clone()))?;
        Self::new(index, domain, range, pieces)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn domain(&self) -> &IntervalUnion {
        &self.domain
    }

    pub fn range(&self) -> &IntervalUnion {
        &self.range
    }

    pub fn pieces(&self) -> &[BranchPiece] {
        &self.pieces
    }

    fn piece_for_source(&self, x: f64) -> Option<&BranchPiece> {
        let idx = self.pieces.partition_point(|p| p.source_bounds().1 <= x);
        match self.pieces.get(idx) {
            Some(p) if p.source_contains(x) => Some(p),
            _ => self.pieces.iter().find(|p| p.source_contains(x)),
        }
    }

    fn piece_for_target(&self, y: f64) -> Option<&BranchPiece> {
        self.pieces.iter().find(|p| p.target_contains(y))
    }

    /// `f_i(x)`, or `None` off the pieces' sources.
    #[inline]
    pub fn forward(&self, x: f64) -> Option<f64> {
        self.piece_for_source(x).map(|p| p.compiled().forward(x))
    }

    /// `Φ_{f_i}(x)`, extended by zero outside the sources.
    #[inline]
    pub fn phi_forward(&self, x: f64) -> f64 {
        self.piece_for_source(x)
            .map_or(0.0, |p| p.compiled().forward_derivative(x))
    }

    /// `(f_i(x), Φ_{f_i}(x))` with a single piece lookup.
    #[inline]
    pub fn forward_with_derivative(&self, x: f64) -> Option<(f64, f64)> {
        self.piece_for_source(x).map(|p| {
            let f = p.compiled();
            (f.forward(x), f.forward_derivative(x))
        })
    }

    /// `f_i⁻¹(y)` restricted to this branch's pieces.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        self.piece_for_target(y).map(|p| p.compiled().inverse(y))
    }

    /// `Φ_{f_i⁻¹}(y)`, extended by zero outside the targets.
    #[inline]
    pub fn phi_inverse(&self, y: f64) -> f64 {
        self.piece_for_target(y)
            .map_or(0.0, |p| p.compiled().inverse_derivative(y))
    }

    /// The common `|slope|` when every piece is affine with the same one.
    pub fn constant_derivative(&self) -> Option<Rational> {
        let mut slopes = self.pieces.iter().map(BranchPiece::constant_derivative);
        let first = slopes.next()??;
        for s in slopes {
            if s? != first {
                return None;
            }
        }
        Some(first)
    }
}

/// How `F` acts on points outside every range `R_i`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum RemainderPolicy {
    #[default]
    Identity,
    Constant(Rational),
}

/// Pointwise quantities exposed by [`BranchingSystem::eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    CoarseMap,
    Branch(usize),
    PhiBranch(usize),
    PhiInverse(usize),
}

#[derive(Debug, Clone, Copy)]
struct TargetEntry {
    lo: f64,
    hi: f64,
    branch: usize,
    piece: usize,
}

/// A family `({f_i}, {D_i})` together with the coarse map `F` on `[0, L)`.
#[derive(Debug, Clone)]
pub struct BranchingSystem {
    name: String,
    ambient: Rational,
    branches: Vec<BranchMap>,
    matrix: ZeroOneMatrix,
    remainder: RemainderPolicy,
    remainder_f64: Option<f64>,
    ambient_f64: f64,
    // all piece targets sorted by left endpoint, for dispatching F
    targets: Vec<TargetEntry>,
}

impl BranchingSystem {
    pub fn new(
        name: impl Into<String>,
        ambient: Rational,
        branches: Vec<BranchMap>,
        matrix: ZeroOneMatrix,
    ) -> Result<Self, BuildError> {
        if branches.is_empty() {
            return Err(BuildError::NoBranches);
        }
        for (position, b) in branches.iter().enumerate() {
            if b.index != position + 1 {
                return Err(BuildError::BadIndex {
                    position: position + 1,
                    index: b.index,
                });
            }
            if b.domain.ambient() != &ambient {
                return Err(SetError::AmbientMismatch {
                    left: ambient.to_string(),
                    right: b.domain.ambient().to_string(),
                }
                .into());
            }
        }
        if matrix.n_max() != branches.len() {
            return Err(BuildError::BranchCountMismatch {
                matrix: matrix.n_max(),
                branches: branches.len(),
            });
        }
        let mut targets: Vec<TargetEntry> = branches
            .iter()
            .enumerate()
            .flat_map(|(b, branch)| {
                branch.pieces.iter().enumerate().map(move |(k, p)| {
                    let (lo, hi) = p.target_bounds();
                    TargetEntry {
                        lo,
                        hi,
                        branch: b,
                        piece: k,
                    }
                })
            })
            .collect();
        targets.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        Ok(BranchingSystem {
            name: name.into(),
            ambient_f64: to_f64(&ambient),
            ambient,
            branches,
            matrix,
            remainder: RemainderPolicy::Identity,
            remainder_f64: None,
            targets,
        })
    }

    pub fn with_remainder(mut self, policy: RemainderPolicy) -> Self {
        self.remainder_f64 = match &policy {
            RemainderPolicy::Identity => None,
            RemainderPolicy::Constant(c) => Some(to_f64(c)),
        };
        self.remainder = policy;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ambient(&self) -> &Rational {
        &self.ambient
    }

    pub fn ambient_f64(&self) -> f64 {
        self.ambient_f64
    }

    pub fn branches(&self) -> &[BranchMap] {
        &self.branches
    }

    /// Branch `i` (1-based).
    pub fn branch(&self, i: usize) -> Option<&BranchMap> {
        i.checked_sub(1).and_then(|k| self.branches.get(k))
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn matrix(&self) -> &ZeroOneMatrix {
        &self.matrix
    }

    pub fn remainder(&self) -> &RemainderPolicy {
        &self.remainder
    }

    /// The whole space `X = [0, L)` as a set.
    pub fn space(&self) -> IntervalUnion {
        IntervalUnion::full(self.ambient.clone()).expect("ambient is positive")
    }

    /// `⋃_{i ≤ n} R_i`.
    pub fn range_union(&self, n: usize) -> IntervalUnion {
        self.branches.iter().take(n).fold(
            IntervalUnion::empty(self.ambient.clone()).expect("ambient is positive"),
            |acc, b| acc.union(&b.range).expect("shared ambient"),
        )
    }

    fn target_entry(&self, x: f64) -> Option<&TargetEntry> {
        let idx = self.targets.partition_point(|t| t.lo <= x);
        // the candidate is the last target starting at or before x
        let cand = idx.checked_sub(1).map(|k| &self.targets[k]);
        match cand {
            Some(t) if x < t.hi => Some(t),
            _ => self.targets.iter().find(|t| t.lo <= x && x < t.hi),
        }
    }

    /// The coarse map `F`: inverse of whichever piece target contains `x`,
    /// the remainder policy elsewhere.
    #[inline]
    pub fn eval_f(&self, x: f64) -> f64 {
        match self.target_entry(x) {
            Some(t) => self.branches[t.branch].pieces[t.piece].compiled().inverse(x),
            None => self.remainder_f64.unwrap_or(x),
        }
    }

    pub fn eval(&self, what: Evaluation, x: f64) -> Result<f64, EvalError> {
        let branch = |i: usize| self.branch(i).ok_or(EvalError::NoSuchBranch(i));
        let out_of = |i: usize| EvalError::OutOfDomain { branch: i, x };
        match what {
            Evaluation::CoarseMap => {
                if !(0.0..self.ambient_f64).contains(&x) {
                    return Err(EvalError::OutOfAmbient(x));
                }
                Ok(self.eval_f(x))
            }
            Evaluation::Branch(i) => branch(i)?.forward(x).ok_or_else(|| out_of(i)),
            Evaluation::PhiBranch(i) => {
                let b = branch(i)?;
                b.piece_for_source(x)
                    .map(|p| p.compiled().forward_derivative(x))
                    .ok_or_else(|| out_of(i))
            }
            Evaluation::PhiInverse(i) => {
                let b = branch(i)?;
                b.piece_for_target(x)
                    .map(|p| p.compiled().inverse_derivative(x))
                    .ok_or_else(|| out_of(i))
            }
        }
    }

    /// Largest `|F'|` over affine pieces; `None` if any piece is not affine.
    pub fn max_expansion(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for b in &self.branches {
            for p in &b.pieces {
                let slope = p.constant_derivative()?;
                worst = worst.max(1.0 / to_f64(&slope));
            }
        }
        Some(worst)
    }

    /// Every rational endpoint appearing in the system's sets and pieces.
    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = Vec::new();
        for b in &self.branches {
            out.extend(b.domain.endpoints().cloned());
            out.extend(b.range.endpoints().cloned());
            for p in &b.pieces {
                out.extend([p.source().lo(), p.source().hi(), p.target().lo(), p.target().hi()].map(Clone::clone));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// `true` when every breakpoint falls on a boundary of the uniform grid
    /// with `cells` cells.
    pub fn aligned_with_grid(&self, cells: usize) -> bool {
        let scale = integer(cells as i64) / &self.ambient;
        self.breakpoints().iter().all(|b| (b * &scale).is_integer())
    }
}
