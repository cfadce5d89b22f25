//! TOML description of a branching system.
//!
//! ```toml
//! name = "identity"
//! ambient = [2, 1]
//!
//! [matrix]
//! kind = "explicit"
//! rows = [[1, 1], [1, 0]]
//!
//! [[branch]]
//! index = 1
//! domain = [[0, 1, 1, 1]]
//! range = [[0, 1, 1, 1]]
//!
//! [[branch.piece]]
//! kind = "affine"
//! source = [0, 1, 1, 1]
//! target = [0, 1, 1, 1]
//! slope = [1, 1]
//! intercept = [0, 1]
//! ```
//!
//! Rationals are `[numerator, denominator]` pairs and intervals are
//! `[lo_num, lo_den, hi_num, hi_den]` quadruples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branching::{
    BranchMap, BranchPiece, BranchingSystem, BuildError, MapKind, Orientation, PieceError, RemainderPolicy,
};
use crate::matrix::{index_set, MatrixError, MatrixKind, RulePattern, ZeroOneMatrix};
use crate::sets::{pair_to_rational, rational_to_pair, Interval, IntervalUnion, Rational, SetError};

#[derive(Debug, Error)]
pub enum DescriptionError {
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Piece(#[from] PieceError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("branch {0}: declares no pieces")]
    NoPieces(usize),
    #[error("matrix kind {0} cannot be written to a description")]
    Unrepresentable(String),
}

pub type Pair = [i64; 2];
pub type Quadruple = [i64; 4];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDescription {
    #[serde(default = "default_name")]
    pub name: String,
    pub ambient: Pair,
    pub matrix: MatrixDesc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remainder: Option<RemainderDesc>,
    #[serde(rename = "branch")]
    pub branches: Vec<BranchDesc>,
}

fn default_name() -> String {
    "custom".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MatrixDesc {
    Explicit { rows: Vec<Vec<u8>> },
    RowSupports { n_max: usize, row: Vec<RowSupport> },
    FullOnes { n_max: usize },
    Staircase { step: usize, n_max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSupport {
    pub index: usize,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RemainderDesc {
    Identity,
    Constant { value: Pair },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDesc {
    pub index: usize,
    /// Defaults to the union of the piece sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<Quadruple>>,
    /// Defaults to the union of the piece targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Vec<Quadruple>>,
    #[serde(rename = "piece")]
    pub pieces: Vec<PieceDesc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PieceDesc {
    /// `f(y) = slope·y + intercept`.
    Affine {
        source: Quadruple,
        target: Quadruple,
        slope: Pair,
        intercept: Pair,
    },
    /// `f(y) = vertex ± sqrt((y − offset)/coeff)`.
    Quadratic {
        source: Quadruple,
        target: Quadruple,
        coeff: Pair,
        vertex: Pair,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Pair>,
        side: Side,
    },
}

fn rat(p: Pair) -> Result<Rational, SetError> {
    pair_to_rational(p[0], p[1])
}

fn pair(r: &Rational) -> Result<Pair, SetError> {
    rational_to_pair(r).map(|(n, d)| [n, d])
}

impl PieceDesc {
    fn build(&self) -> Result<BranchPiece, DescriptionError> {
        let (source, target, map) = match self {
            PieceDesc::Affine {
                source,
                target,
                slope,
                intercept,
            } => (source, target, MapKind::affine(rat(*slope)?, rat(*intercept)?)),
            PieceDesc::Quadratic {
                source,
                target,
                coeff,
                vertex,
                offset,
                side,
            } => {
                let side = match side {
                    Side::Increasing => Orientation::Increasing,
                    Side::Decreasing => Orientation::Decreasing,
                };
                let mut map = MapKind::quadratic(rat(*coeff)?, rat(*vertex)?, side);
                if let (Some(o), MapKind::Quadratic { offset, .. }) = (offset, &mut map) {
                    *offset = rat(*o)?;
                }
                (source, target, map)
            }
        };
        Ok(BranchPiece::new(
            Interval::from_quadruple(*source)?,
            Interval::from_quadruple(*target)?,
            map,
        )?)
    }

    fn describe(piece: &BranchPiece) -> Result<PieceDesc, DescriptionError> {
        let source = piece.source().to_quadruple()?;
        let target = piece.target().to_quadruple()?;
        Ok(match piece.map() {
            MapKind::Affine { slope, intercept } => PieceDesc::Affine {
                source,
                target,
                slope: pair(slope)?,
                intercept: pair(intercept)?,
            },
            MapKind::Quadratic {
                coeff,
                vertex,
                offset,
                side,
            } => PieceDesc::Quadratic {
                source,
                target,
                coeff: pair(coeff)?,
                vertex: pair(vertex)?,
                offset: if num_traits::Zero::is_zero(offset) {
                    None
                } else {
                    Some(pair(offset)?)
                },
                side: match side {
                    Orientation::Increasing => Side::Increasing,
                    Orientation::Decreasing => Side::Decreasing,
                },
            },
        })
    }
}

impl MatrixDesc {
    pub fn build(&self) -> Result<ZeroOneMatrix, MatrixError> {
        match self {
            MatrixDesc::Explicit { rows } => ZeroOneMatrix::explicit(rows.clone()),
            MatrixDesc::RowSupports { n_max, row } => {
                let map = row
                    .iter()
                    .map(|r| (r.index, index_set(r.columns.iter().copied())))
                    .collect();
                ZeroOneMatrix::new(MatrixKind::RowSupports(map), *n_max)
            }
            MatrixDesc::FullOnes { n_max } => ZeroOneMatrix::full_ones(*n_max),
            MatrixDesc::Staircase { step, n_max } => ZeroOneMatrix::staircase(*step, *n_max),
        }
    }

    pub fn describe(matrix: &ZeroOneMatrix) -> MatrixDesc {
        let n_max = matrix.n_max();
        match matrix.kind() {
            MatrixKind::FullOnes => MatrixDesc::FullOnes { n_max },
            MatrixKind::ExplicitBlock(rows) if rows.len() == n_max => MatrixDesc::Explicit { rows: rows.clone() },
            MatrixKind::ExplicitBlock(rows) => MatrixDesc::RowSupports {
                n_max,
                row: rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| RowSupport {
                        index: i + 1,
                        columns: r
                            .iter()
                            .enumerate()
                            .filter(|(_, &v)| v == 1)
                            .map(|(j, _)| j + 1)
                            .collect(),
                    })
                    .collect(),
            },
            MatrixKind::RowSupports(map) => MatrixDesc::RowSupports {
                n_max,
                row: map
                    .iter()
                    .map(|(&index, s)| RowSupport {
                        index,
                        columns: s.iter().copied().collect(),
                    })
                    .collect(),
            },
            MatrixKind::Rule(RulePattern::Staircase { step }) => MatrixDesc::Staircase { step: *step, n_max },
        }
    }
}

impl SystemDescription {
    pub fn from_toml_str(text: &str) -> Result<Self, DescriptionError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> Result<String, DescriptionError> {
        Ok(toml::to_string(self)?)
    }

    pub fn build(&self) -> Result<BranchingSystem, DescriptionError> {
        let ambient = rat(self.ambient)?;
        let matrix = self.matrix.build()?;
        let mut branches = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            if b.pieces.is_empty() {
                return Err(DescriptionError::NoPieces(b.index));
            }
            let pieces = b.pieces.iter().map(PieceDesc::build).collect::<Result<Vec<_>, _>>()?;
            let union = |quads: &Option<Vec<Quadruple>>, fallback: &dyn Fn(&BranchPiece) -> Interval| match quads {
                Some(q) => IntervalUnion::from_quadruples(ambient.clone(), q),
                None => IntervalUnion::from_intervals(ambient.clone(), pieces.iter().map(fallback)),
            };
            let domain = union(&b.domain, &|p| p.source().clone())?;
            let range = union(&b.range, &|p| p.target().clone())?;
            branches.push(BranchMap::new(b.index, domain, range, pieces)?);
        }
        let sys = BranchingSystem::new(self.name.clone(), ambient, branches, matrix)?;
        Ok(match &self.remainder {
            None | Some(RemainderDesc::Identity) => sys,
            Some(RemainderDesc::Constant { value }) => sys.with_remainder(RemainderPolicy::Constant(rat(*value)?)),
        })
    }

    /// The description of an existing system; fails when a rational does
    /// not fit in 64 bits.
    pub fn describe(sys: &BranchingSystem) -> Result<Self, DescriptionError> {
        let branches = sys
            .branches()
            .iter()
            .map(|b| {
                Ok(BranchDesc {
                    index: b.index(),
                    domain: Some(b.domain().to_quadruples()?),
                    range: Some(b.range().to_quadruples()?),
                    pieces: b
                        .pieces()
                        .iter()
                        .map(PieceDesc::describe)
                        .collect::<Result<_, DescriptionError>>()?,
                })
            })
            .collect::<Result<_, DescriptionError>>()?;
        let remainder = match sys.remainder() {
            RemainderPolicy::Identity => None,
            RemainderPolicy::Constant(c) => Some(RemainderDesc::Constant { value: pair(c)? }),
        };
        Ok(SystemDescription {
            name: sys.name().to_string(),
            ambient: pair(sys.ambient())?,
            matrix: MatrixDesc::describe(sys.matrix()),
            remainder,
            branches,
        })
    }
}
