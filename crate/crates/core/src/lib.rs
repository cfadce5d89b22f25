//! Branching systems on interval spaces, the Cuntz-Krieger representations
//! they induce on L², and the Perron-Frobenius operator of the coarse map.

pub mod branching;
pub mod description;
pub mod matrix;
pub mod operators;
pub mod perron;
pub mod sets;

pub use branching::{BranchMap, BranchPiece, BranchingSystem, MapKind, Orientation, UvPair, ValidationReport};
pub use description::SystemDescription;
pub use matrix::{IndexSet, MatrixKind, ZeroOneMatrix};
pub use operators::{GridFunction, RelationReport};
pub use perron::{PerronError, PfReport};
pub use sets::{Interval, IntervalUnion, Rational};
