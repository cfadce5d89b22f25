//! Possibly infinite 0-1 matrices described by rules rather than storage.
//!
//! Indices are 1-based throughout, matching the usual `A(i, j)` notation.
//! A matrix carries a truncation bound `n_max`: the largest row index for
//! which branches get instantiated.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub type IndexSet = BTreeSet<usize>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("row {0} is identically zero")]
    ZeroRow(usize),
    #[error("entry ({row}, {col}) = {value} is not 0 or 1")]
    InvalidEntry { row: usize, col: usize, value: u8 },
    #[error("index 0 is not a valid row or column (indices start at 1)")]
    ZeroIndex,
    #[error("truncation bound must be at least 1")]
    EmptyTruncation,
    #[error("staircase step must be at least 1")]
    InvalidStep,
}

/// `{j : A(U, V, j) = 1}` is not provably finite.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("A(U, V, ·) is not finitely supported")]
pub struct NotFinitelySupported;

/// Named entry rules with integer parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RulePattern {
    /// Row `i` has ones exactly in columns `1..=ceil(i / step)`.
    Staircase { step: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixKind {
    FullOnes,
    /// Finite block of rows; entries outside the block are 0.
    ExplicitBlock(Vec<Vec<u8>>),
    /// Row index → set of columns holding a 1. Absent rows are zero.
    RowSupports(BTreeMap<usize, IndexSet>),
    Rule(RulePattern),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroOneMatrix {
    kind: MatrixKind,
    n_max: usize,
}

impl ZeroOneMatrix {
    pub fn new(kind: MatrixKind, n_max: usize) -> Result<Self, MatrixError> {
        if n_max == 0 {
            return Err(MatrixError::EmptyTruncation);
        }
        match &kind {
            MatrixKind::ExplicitBlock(rows) => {
                for (r, row) in rows.iter().enumerate() {
                    for (c, &value) in row.iter().enumerate() {
                        if value > 1 {
                            return Err(MatrixError::InvalidEntry {
                                row: r + 1,
                                col: c + 1,
                                value,
                            });
                        }
                    }
                }
            }
            MatrixKind::RowSupports(map) => {
                if map.keys().any(|&k| k == 0) || map.values().any(|s| s.contains(&0)) {
                    return Err(MatrixError::ZeroIndex);
                }
            }
            MatrixKind::Rule(RulePattern::Staircase { step }) => {
                if *step == 0 {
                    return Err(MatrixError::InvalidStep);
                }
            }
            MatrixKind::FullOnes => {}
        }
        let matrix = ZeroOneMatrix { kind, n_max };
        for i in 1..=n_max {
            if matrix.row_support(i).is_some_and(|s| s.is_empty()) {
                return Err(MatrixError::ZeroRow(i));
            }
        }
        Ok(matrix)
    }

    pub fn full_ones(n_max: usize) -> Result<Self, MatrixError> {
        Self::new(MatrixKind::FullOnes, n_max)
    }

    /// Explicit square or rectangular block; `n_max` is the number of rows.
    pub fn explicit(rows: Vec<Vec<u8>>) -> Result<Self, MatrixError> {
        let n = rows.len();
        Self::new(MatrixKind::ExplicitBlock(rows), n)
    }

    pub fn staircase(step: usize, n_max: usize) -> Result<Self, MatrixError> {
        Self::new(MatrixKind::Rule(RulePattern::Staircase { step }), n_max)
    }

    pub fn kind(&self) -> &MatrixKind {
        &self.kind
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Same rule with a different truncation bound.
    pub fn with_n_max(&self, n_max: usize) -> Result<Self, MatrixError> {
        Self::new(self.kind.clone(), n_max)
    }

    pub fn entry(&self, i: usize, j: usize) -> u8 {
        match &self.kind {
            MatrixKind::FullOnes => 1,
            MatrixKind::ExplicitBlock(rows) => rows
                .get(i.wrapping_sub(1))
                .and_then(|row| row.get(j.wrapping_sub(1)))
                .copied()
                .unwrap_or(0),
            MatrixKind::RowSupports(map) => map.get(&i).is_some_and(|s| s.contains(&j)) as u8,
            MatrixKind::Rule(RulePattern::Staircase { step }) => (j >= 1 && j <= i.div_ceil(*step)) as u8,
        }
    }

    /// Every rule except the all-ones matrix is row-finite.
    pub fn row_is_finite(&self, _row: usize) -> bool {
        !matches!(self.kind, MatrixKind::FullOnes)
    }

    /// `{j : A(i, j) = 1}`, or `None` when the row has infinitely many ones.
    pub fn row_support(&self, i: usize) -> Option<IndexSet> {
        match &self.kind {
            MatrixKind::FullOnes => None,
            MatrixKind::ExplicitBlock(rows) => Some(
                rows.get(i.wrapping_sub(1))
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(_, &v)| v == 1)
                            .map(|(c, _)| c + 1)
                            .collect()
                    })
                    .unwrap_or_default(),
            ),
            MatrixKind::RowSupports(map) => Some(map.get(&i).cloned().unwrap_or_default()),
            MatrixKind::Rule(RulePattern::Staircase { step }) => Some((1..=i.div_ceil(*step)).collect()),
        }
    }

    /// Columns `j <= bound` with `A(i, j) = 1`.
    pub fn row_support_truncated(&self, i: usize, bound: usize) -> Vec<usize> {
        match self.row_support(i) {
            Some(s) => s.into_iter().take_while(|&j| j <= bound).collect(),
            None => (1..=bound).filter(|&j| self.entry(i, j) == 1).collect(),
        }
    }

    /// `A(U, V, j) = ∏_{u∈U} A(u, j) · ∏_{v∈V} (1 − A(v, j))`.
    pub fn a_uvj(&self, u: &IndexSet, v: &IndexSet, j: usize) -> u8 {
        let ones = u.iter().all(|&r| self.entry(r, j) == 1);
        let zeros = v.iter().all(|&r| self.entry(r, j) == 0);
        (ones && zeros) as u8
    }

    /// `{j : A(U, V, j) = 1}` when it is provably finite.
    ///
    /// Finiteness is established when some `u ∈ U` has a finite row, or when
    /// every row involved is all-ones (then any `v ∈ V` kills every term).
    pub fn support_uv(&self, u: &IndexSet, v: &IndexSet) -> Result<IndexSet, NotFinitelySupported> {
        let finite_rows: Vec<IndexSet> = u.iter().filter_map(|&r| self.row_support(r)).collect();
        if let Some(first) = finite_rows.first() {
            return Ok(first.iter().copied().filter(|&j| self.a_uvj(u, v, j) == 1).collect());
        }
        if matches!(self.kind, MatrixKind::FullOnes) && !v.is_empty() {
            return Ok(IndexSet::new());
        }
        // U = ∅ (or all-ones rows with V = ∅): for a row-finite matrix every
        // large j satisfies A(v, j) = 0, so the support is infinite.
        Err(NotFinitelySupported)
    }
}

/// Convenience for building index sets in calls and tests.
pub fn index_set<I: IntoIterator<Item = usize>>(items: I) -> IndexSet {
    items.into_iter().collect()
}
