//! Exact algebra of finite unions of half-open intervals `[a, b)` inside an
//! ambient space `[0, L)`.
//!
//! Every endpoint is an arbitrary-precision rational, so "equal up to a null
//! set" reduces to exact equality of canonical forms: two canonical unions
//! differ on a set of positive measure unless they are identical.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational number used for every endpoint and coefficient.
pub type Rational = BigRational;

/// Shorthand for `numer / denom` as a [`Rational`].
///
/// Panics if `denom` is zero.
pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn integer(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub(crate) fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Nearest rational with denominator `2^bits`.
pub fn dyadic_approximation(value: f64, bits: u32) -> Rational {
    let scale = 2f64.powi(bits as i32);
    let numer = (value * scale).round() as i128;
    Rational::new(BigInt::from(numer), BigInt::one() << bits)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SetError {
    #[error("interval [{lo}, {hi}) is empty")]
    EmptyInterval { lo: String, hi: String },
    #[error("interval [{lo}, {hi}) is not contained in the ambient space [0, {ambient})")]
    OutOfAmbient { lo: String, hi: String, ambient: String },
    #[error("ambient spaces differ: [0, {left}) vs [0, {right})")]
    AmbientMismatch { left: String, right: String },
    #[error("ambient length must be positive, got {0}")]
    NonPositiveAmbient(String),
    #[error("zero denominator in rational endpoint")]
    ZeroDenominator,
    #[error("rational {0} does not fit into a 64-bit numerator/denominator pair")]
    Overflow(String),
}

/// A nonempty half-open interval `[lo, hi)` with rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, SetError> {
        if lo >= hi {
            return Err(SetError::EmptyInterval {
                lo: lo.to_string(),
                hi: hi.to_string(),
            });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x < &self.hi
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / integer(2)
    }

    /// Intersection with another interval, `None` when the overlap is empty.
    pub fn meet(&self, other: &Interval) -> Option<Interval> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        Interval::new(lo, hi).ok()
    }

    pub fn to_quadruple(&self) -> Result<[i64; 4], SetError> {
        let (a, b) = rational_to_pair(&self.lo)?;
        let (c, d) = rational_to_pair(&self.hi)?;
        Ok([a, b, c, d])
    }

    pub fn from_quadruple(q: [i64; 4]) -> Result<Self, SetError> {
        Interval::new(pair_to_rational(q[0], q[1])?, pair_to_rational(q[2], q[3])?)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

pub fn rational_to_pair(value: &Rational) -> Result<(i64, i64), SetError> {
    let overflow = || SetError::Overflow(value.to_string());
    let n = value.numer().to_i64().ok_or_else(overflow)?;
    let d = value.denom().to_i64().ok_or_else(overflow)?;
    Ok((n, d))
}

pub fn pair_to_rational(numer: i64, denom: i64) -> Result<Rational, SetError> {
    if denom == 0 {
        return Err(SetError::ZeroDenominator);
    }
    Ok(rational(numer, denom))
}

/// Canonical finite union of disjoint, non-adjacent half-open intervals
/// inside `[0, ambient)`. Pieces are sorted and merged on construction.
#[derive(Clone)]
pub struct IntervalUnion {
    ambient: Rational,
    pieces: Vec<Interval>,
    // f64 copies of the endpoints for fast point membership
    bounds: Vec<(f64, f64)>,
}

impl PartialEq for IntervalUnion {
    fn eq(&self, other: &Self) -> bool {
        self.ambient == other.ambient && self.pieces == other.pieces
    }
}

impl Eq for IntervalUnion {}

impl fmt::Debug for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntervalUnion({} in [0, {}))", self, self.ambient)
    }
}

impl fmt::Display for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.is_empty() {
            return write!(f, "∅");
        }
        for (k, piece) in self.pieces.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "{piece}")?;
        }
        Ok(())
    }
}

impl IntervalUnion {
    pub fn empty(ambient: Rational) -> Result<Self, SetError> {
        if !ambient.is_positive() {
            return Err(SetError::NonPositiveAmbient(ambient.to_string()));
        }
        Ok(Self::from_canonical(ambient, Vec::new()))
    }

    /// The whole ambient space `[0, L)`.
    pub fn full(ambient: Rational) -> Result<Self, SetError> {
        let whole = Interval::new(Rational::zero(), ambient.clone())
            .map_err(|_| SetError::NonPositiveAmbient(ambient.to_string()))?;
        Ok(Self::from_canonical(ambient, vec![whole]))
    }

    pub fn interval(ambient: Rational, lo: Rational, hi: Rational) -> Result<Self, SetError> {
        Self::from_intervals(ambient, [Interval::new(lo, hi)?])
    }

    /// Builds the canonical union of arbitrary (possibly overlapping)
    /// intervals, each of which must lie inside the ambient space.
    pub fn from_intervals<I>(ambient: Rational, intervals: I) -> Result<Self, SetError>
    where
        I: IntoIterator<Item = Interval>,
    {
        if !ambient.is_positive() {
            return Err(SetError::NonPositiveAmbient(ambient.to_string()));
        }
        let mut pieces: Vec<Interval> = intervals.into_iter().collect();
        for piece in &pieces {
            if piece.lo.is_negative() || piece.hi > ambient {
                return Err(SetError::OutOfAmbient {
                    lo: piece.lo.to_string(),
                    hi: piece.hi.to_string(),
                    ambient: ambient.to_string(),
                });
            }
        }
        pieces.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
        Ok(Self::from_canonical(ambient, merge_sorted(pieces)))
    }

    pub fn from_quadruples(ambient: Rational, quads: &[[i64; 4]]) -> Result<Self, SetError> {
        let intervals = quads
            .iter()
            .map(|q| Interval::from_quadruple(*q))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_intervals(ambient, intervals)
    }

    pub fn to_quadruples(&self) -> Result<Vec<[i64; 4]>, SetError> {
        self.pieces.iter().map(Interval::to_quadruple).collect()
    }

    fn from_canonical(ambient: Rational, pieces: Vec<Interval>) -> Self {
        let bounds = pieces.iter().map(|p| (to_f64(&p.lo), to_f64(&p.hi))).collect();
        IntervalUnion {
            ambient,
            pieces,
            bounds,
        }
    }

    pub fn ambient(&self) -> &Rational {
        &self.ambient
    }

    pub fn pieces(&self) -> &[Interval] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn measure(&self) -> Rational {
        self.pieces.iter().fold(Rational::zero(), |acc, p| acc + p.length())
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let idx = self.pieces.partition_point(|p| &p.hi <= x);
        idx < self.pieces.len() && self.pieces[idx].contains(x)
    }

    /// Floating-point membership test against the cached endpoints.
    pub fn contains_f64(&self, x: f64) -> bool {
        let idx = self.bounds.partition_point(|&(_, hi)| hi <= x);
        idx < self.bounds.len() && self.bounds[idx].0 <= x
    }

    /// Measure of the overlap with `[lo, hi)`, in floating point.
    pub fn overlap_f64(&self, lo: f64, hi: f64) -> f64 {
        let start = self.bounds.partition_point(|&(_, b)| b <= lo);
        let mut total = 0.0;
        for &(a, b) in &self.bounds[start..] {
            if a >= hi {
                break;
            }
            let len = b.min(hi) - a.max(lo);
            if len > 0.0 {
                total += len;
            }
        }
        total
    }

    fn check_ambient(&self, other: &IntervalUnion) -> Result<(), SetError> {
        if self.ambient != other.ambient {
            return Err(SetError::AmbientMismatch {
                left: self.ambient.to_string(),
                right: other.ambient.to_string(),
            });
        }
        Ok(())
    }

    pub fn union(&self, other: &IntervalUnion) -> Result<IntervalUnion, SetError> {
        self.check_ambient(other)?;
        let mut all: Vec<Interval> = Vec::with_capacity(self.pieces.len() + other.pieces.len());
        // two-way merge of sorted inputs
        let (mut a, mut b) = (0, 0);
        while a < self.pieces.len() || b < other.pieces.len() {
            let take_left = match (self.pieces.get(a), other.pieces.get(b)) {
                (Some(x), Some(y)) => x.lo <= y.lo,
                (Some(_), None) => true,
                _ => false,
            };
            if take_left {
                all.push(self.pieces[a].clone());
                a += 1;
            } else {
                all.push(other.pieces[b].clone());
                b += 1;
            }
        }
        Ok(Self::from_canonical(self.ambient.clone(), merge_sorted(all)))
    }

    pub fn intersect(&self, other: &IntervalUnion) -> Result<IntervalUnion, SetError> {
        self.check_ambient(other)?;
        let mut out = Vec::new();
        let (mut a, mut b) = (0, 0);
        while a < self.pieces.len() && b < other.pieces.len() {
            let (x, y) = (&self.pieces[a], &other.pieces[b]);
            if let Some(common) = x.meet(y) {
                out.push(common);
            }
            match x.hi.cmp(&y.hi) {
                Ordering::Less => a += 1,
                Ordering::Greater => b += 1,
                Ordering::Equal => {
                    a += 1;
                    b += 1;
                }
            }
        }
        Ok(Self::from_canonical(self.ambient.clone(), out))
    }

    /// Complement inside the ambient space.
    pub fn complement(&self) -> IntervalUnion {
        let mut out = Vec::new();
        let mut cursor = Rational::zero();
        for piece in &self.pieces {
            if cursor < piece.lo {
                out.push(Interval {
                    lo: cursor.clone(),
                    hi: piece.lo.clone(),
                });
            }
            cursor = piece.hi.clone();
        }
        if cursor < self.ambient {
            out.push(Interval {
                lo: cursor,
                hi: self.ambient.clone(),
            });
        }
        Self::from_canonical(self.ambient.clone(), out)
    }

    pub fn difference(&self, other: &IntervalUnion) -> Result<IntervalUnion, SetError> {
        self.check_ambient(other)?;
        self.intersect(&other.complement())
    }

    pub fn symmetric_difference(&self, other: &IntervalUnion) -> Result<IntervalUnion, SetError> {
        self.difference(other)?.union(&other.difference(self)?)
    }

    /// `true` iff the symmetric difference has Lebesgue measure zero.
    pub fn ae_equal(&self, other: &IntervalUnion) -> Result<bool, SetError> {
        Ok(self.symmetric_difference(other)?.measure().is_zero())
    }

    pub fn is_subset_ae(&self, other: &IntervalUnion) -> Result<bool, SetError> {
        Ok(self.difference(other)?.measure().is_zero())
    }

    /// Every finite endpoint of the union.
    pub fn endpoints(&self) -> impl Iterator<Item = &Rational> {
        self.pieces.iter().flat_map(|p| [&p.lo, &p.hi])
    }

    /// Same pieces, re-homed in a different ambient space.
    pub fn with_ambient(&self, ambient: Rational) -> Result<IntervalUnion, SetError> {
        Self::from_intervals(ambient, self.pieces.iter().cloned())
    }
}

fn merge_sorted(sorted: Vec<Interval>) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::with_capacity(sorted.len());
    for piece in sorted {
        match out.last_mut() {
            Some(last) if piece.lo <= last.hi => {
                if piece.hi > last.hi {
                    last.hi = piece.hi;
                }
            }
            _ => out.push(piece),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(lo: i64, hi: i64, ambient: i64) -> IntervalUnion {
        IntervalUnion::interval(integer(ambient), integer(lo), integer(hi)).unwrap()
    }

    #[test]
    fn adjacent_pieces_merge() {
        let u = unit(0, 1, 2).union(&unit(1, 2, 2)).unwrap();
        assert_eq!(u, unit(0, 2, 2));
        assert_eq!(u.pieces().len(), 1);
    }

    #[test]
    fn half_open_intervals_touching_are_disjoint() {
        let i = unit(0, 1, 2).intersect(&unit(1, 2, 2)).unwrap();
        assert!(i.is_empty());
        assert!(i.measure().is_zero());
    }

    #[test]
    fn difference_removes_right_half() {
        assert_eq!(unit(0, 2, 2).difference(&unit(1, 2, 2)).unwrap(), unit(0, 1, 2));
    }

    #[test]
    fn ae_equal_cases() {
        assert!(unit(0, 1, 2).ae_equal(&unit(0, 1, 2)).unwrap());
        assert!(!unit(0, 1, 2).ae_equal(&unit(0, 2, 2)).unwrap());
        // [1, 1) is rejected rather than silently dropped
        assert!(matches!(
            Interval::new(integer(1), rational(10000, 10000)),
            Err(SetError::EmptyInterval { .. })
        ));
    }

    #[test]
    fn ambient_mismatch_is_an_error() {
        let a = unit(0, 1, 2);
        let b = unit(0, 1, 3);
        assert!(matches!(a.union(&b), Err(SetError::AmbientMismatch { .. })));
        assert!(matches!(a.ae_equal(&b), Err(SetError::AmbientMismatch { .. })));
    }

    #[test]
    fn out_of_ambient_rejected() {
        assert!(matches!(
            IntervalUnion::interval(integer(1), integer(0), integer(2)),
            Err(SetError::OutOfAmbient { .. })
        ));
    }

    #[test]
    fn complement_of_middle_piece() {
        let mid = IntervalUnion::interval(integer(1), rational(1, 4), rational(1, 2)).unwrap();
        let c = mid.complement();
        assert_eq!(c.pieces().len(), 2);
        assert_eq!(c.measure(), rational(3, 4));
        assert!(IntervalUnion::full(integer(1)).unwrap().complement().is_empty());
    }

    #[test]
    fn point_membership_respects_half_open_convention() {
        let u = unit(1, 2, 4).union(&unit(3, 4, 4)).unwrap();
        assert!(u.contains(&integer(1)));
        assert!(!u.contains(&integer(2)));
        assert!(u.contains_f64(3.0));
        assert!(!u.contains_f64(2.0));
        assert!(!u.contains_f64(4.0));
        assert!(u.contains_f64(1.999));
    }

    #[test]
    fn quadruples_round_trip() {
        let u = IntervalUnion::from_quadruples(integer(1), &[[0, 1, 1, 8], [1, 4, 3, 8]]).unwrap();
        assert_eq!(u.to_quadruples().unwrap(), vec![[0, 1, 1, 8], [1, 4, 3, 8]]);
        assert!(matches!(
            IntervalUnion::from_quadruples(integer(1), &[[0, 0, 1, 2]]),
            Err(SetError::ZeroDenominator)
        ));
    }

    #[test]
    fn overlap_measure() {
        let u = unit(1, 2, 4);
        assert_eq!(u.overlap_f64(0.5, 1.5), 0.5);
        assert_eq!(u.overlap_f64(2.0, 3.0), 0.0);
    }
}
