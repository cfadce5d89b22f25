//! Monotone closed-form pieces `f: source → target` and their inverses.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::sets::{dyadic_approximation, integer, to_f64, Interval, Rational};

/// Denominator exponent for rounding irrational endpoints to rationals.
pub const ROUNDING_BITS: u32 = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PieceError {
    #[error("affine slope must be nonzero")]
    ZeroSlope,
    #[error("quadratic coefficient must be nonzero")]
    ZeroCoefficient,
    #[error("target {target} straddles the vertex {vertex}; the piece is not monotone")]
    NotMonotone { target: String, vertex: String },
    #[error("piece maps {source_interval} onto [{image_lo}, {image_hi}), expected {target}")]
    EndpointMismatch {
        source_interval: String,
        target: String,
        image_lo: String,
        image_hi: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Increasing,
    Decreasing,
}

impl Orientation {
    pub fn sign(self) -> i64 {
        match self {
            Orientation::Increasing => 1,
            Orientation::Decreasing => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Orientation::Increasing),
            -1 => Some(Orientation::Decreasing),
            _ => None,
        }
    }

    fn flip(self) -> Self {
        match self {
            Orientation::Increasing => Orientation::Decreasing,
            Orientation::Decreasing => Orientation::Increasing,
        }
    }
}

/// Closed-form monotone map.
///
/// `Quadratic` is the branch that inverts `F(x) = offset + coeff·(x − vertex)²`
/// on one side of the vertex:
/// `f(y) = vertex ± sqrt((y − offset) / coeff)`, with the sign given by
/// `side` (`Increasing` picks `+`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapKind {
    Affine {
        slope: Rational,
        intercept: Rational,
    },
    Quadratic {
        coeff: Rational,
        vertex: Rational,
        offset: Rational,
        side: Orientation,
    },
}

impl MapKind {
    pub fn affine(slope: Rational, intercept: Rational) -> Self {
        MapKind::Affine { slope, intercept }
    }

    pub fn quadratic(coeff: Rational, vertex: Rational, side: Orientation) -> Self {
        MapKind::Quadratic {
            coeff,
            vertex,
            offset: Rational::zero(),
            side,
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, MapKind::Affine { .. })
    }

    /// Exact image of a rational under the inverse map `F`.
    pub fn inverse_exact(&self, x: &Rational) -> Rational {
        match self {
            MapKind::Affine { slope, intercept } => (x - intercept) / slope,
            MapKind::Quadratic {
                coeff, vertex, offset, ..
            } => {
                let d = x - vertex;
                offset + coeff * &d * &d
            }
        }
    }

    /// Image of a rational under the forward map.
    ///
    /// Returns the image and an upper bound on its rounding error; the bound
    /// is zero whenever the image is rational and therefore exact.
    pub fn forward_exact(&self, y: &Rational) -> (Rational, f64) {
        match self {
            MapKind::Affine { slope, intercept } => (slope * y + intercept, 0.0),
            MapKind::Quadratic {
                coeff,
                vertex,
                offset,
                side,
            } => {
                let radicand = (y - offset) / coeff;
                let radicand = if radicand.is_negative() {
                    Rational::zero()
                } else {
                    radicand
                };
                let sign = integer(side.sign());
                if let Some(root) = exact_sqrt(&radicand) {
                    return (vertex + sign * root, 0.0);
                }
                let approx = to_f64(vertex) + side.sign() as f64 * to_f64(&radicand).sqrt();
                let rounded = dyadic_approximation(approx, ROUNDING_BITS);
                let bound = 0.5 * 2f64.powi(-(ROUNDING_BITS as i32)) + 4.0 * f64::EPSILON * approx.abs().max(1.0);
                (rounded, bound)
            }
        }
    }

    /// `outer ∘ inner` in closed form, when the family is closed under that
    /// composition (affine with anything; two square roots never compose).
    pub fn compose(outer: &MapKind, inner: &MapKind) -> Option<MapKind> {
        match (outer, inner) {
            (MapKind::Affine { slope: a, intercept: b }, MapKind::Affine { slope: c, intercept: d }) => {
                Some(MapKind::Affine {
                    slope: a * c,
                    intercept: a * d + b,
                })
            }
            (
                MapKind::Quadratic {
                    coeff,
                    vertex,
                    offset,
                    side,
                },
                MapKind::Affine { slope, intercept },
            ) => {
                // (a·x + b − y0)/c = (x − (y0 − b)/a) / (c/a)
                Some(MapKind::Quadratic {
                    coeff: coeff / slope,
                    vertex: vertex.clone(),
                    offset: (offset - intercept) / slope,
                    side: *side,
                })
            }
            (
                MapKind::Affine { slope, intercept },
                MapKind::Quadratic {
                    coeff,
                    vertex,
                    offset,
                    side,
                },
            ) => {
                // a·(x0 ± sqrt(u/c)) + b = (a·x0 + b) ± sign(a)·sqrt(u/(c/a²))
                let side = if slope.is_negative() { side.flip() } else { *side };
                Some(MapKind::Quadratic {
                    coeff: coeff / (slope * slope),
                    vertex: slope * vertex + intercept,
                    offset: offset.clone(),
                    side,
                })
            }
            (MapKind::Quadratic { .. }, MapKind::Quadratic { .. }) => None,
        }
    }

    pub fn compile(&self) -> CompiledMap {
        match self {
            MapKind::Affine { slope, intercept } => CompiledMap::Affine {
                slope: to_f64(slope),
                intercept: to_f64(intercept),
            },
            MapKind::Quadratic {
                coeff,
                vertex,
                offset,
                side,
            } => CompiledMap::Quadratic {
                coeff: to_f64(coeff),
                vertex: to_f64(vertex),
                offset: to_f64(offset),
                sign: side.sign() as f64,
            },
        }
    }
}

fn exact_sqrt(value: &Rational) -> Option<Rational> {
    if value.is_negative() {
        return None;
    }
    let n = value.numer().sqrt();
    let d = value.denom().sqrt();
    if &(&n * &n) == value.numer() && &(&d * &d) == value.denom() {
        Some(Rational::new(n, d))
    } else {
        None
    }
}

/// Floating-point evaluator for a [`MapKind`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompiledMap {
    Affine {
        slope: f64,
        intercept: f64,
    },
    Quadratic {
        coeff: f64,
        vertex: f64,
        offset: f64,
        sign: f64,
    },
}

impl CompiledMap {
    #[inline]
    pub fn forward(&self, y: f64) -> f64 {
        match *self {
            CompiledMap::Affine { slope, intercept } => slope * y + intercept,
            CompiledMap::Quadratic {
                coeff,
                vertex,
                offset,
                sign,
            } => vertex + sign * ((y - offset) / coeff).max(0.0).sqrt(),
        }
    }

    #[inline]
    pub fn inverse(&self, x: f64) -> f64 {
        match *self {
            CompiledMap::Affine { slope, intercept } => (x - intercept) / slope,
            CompiledMap::Quadratic {
                coeff, vertex, offset, ..
            } => {
                let d = x - vertex;
                offset + coeff * d * d
            }
        }
    }

    /// `|f'(y)|`, the Radon-Nikodym derivative of the forward map.
    #[inline]
    pub fn forward_derivative(&self, y: f64) -> f64 {
        match *self {
            CompiledMap::Affine { slope, .. } => slope.abs(),
            CompiledMap::Quadratic { coeff, offset, .. } => {
                let root = ((y - offset) / coeff).max(0.0).sqrt();
                1.0 / (2.0 * coeff.abs() * root)
            }
        }
    }

    /// `|F'(x)|`, the Radon-Nikodym derivative of the inverse map.
    #[inline]
    pub fn inverse_derivative(&self, x: f64) -> f64 {
        match *self {
            CompiledMap::Affine { slope, .. } => 1.0 / slope.abs(),
            CompiledMap::Quadratic { coeff, vertex, .. } => 2.0 * coeff.abs() * (x - vertex).abs(),
        }
    }
}

/// One monotone piece of a branch map, a bijection `source → target` up to
/// endpoints.
#[derive(Debug, Clone)]
pub struct BranchPiece {
    source: Interval,
    target: Interval,
    map: MapKind,
    compiled: CompiledMap,
    source_f64: (f64, f64),
    target_f64: (f64, f64),
}

impl PartialEq for BranchPiece {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.target == other.target && self.map == other.map
    }
}

impl BranchPiece {
    /// Checks that `map` is monotone on `target`'s side of any vertex and
    /// that its inverse sends the target endpoints exactly onto the source
    /// endpoints.
    pub fn new(source: Interval, target: Interval, map: MapKind) -> Result<Self, PieceError> {
        let increasing = match &map {
            MapKind::Affine { slope, .. } => {
                if slope.is_zero() {
                    return Err(PieceError::ZeroSlope);
                }
                slope.is_positive()
            }
            MapKind::Quadratic {
                coeff, vertex, side, ..
            } => {
                if coeff.is_zero() {
                    return Err(PieceError::ZeroCoefficient);
                }
                let on_side = match side {
                    Orientation::Increasing => target.lo() >= vertex,
                    Orientation::Decreasing => target.hi() <= vertex,
                };
                if !on_side {
                    return Err(PieceError::NotMonotone {
                        target: target.to_string(),
                        vertex: vertex.to_string(),
                    });
                }
                // f' has sign side·sign(coeff)
                (*side == Orientation::Increasing) == coeff.is_positive()
            }
        };
        let (a, b) = (map.inverse_exact(target.lo()), map.inverse_exact(target.hi()));
        let (image_lo, image_hi) = if increasing { (a, b) } else { (b, a) };
        if &image_lo != source.lo() || &image_hi != source.hi() {
            return Err(PieceError::EndpointMismatch {
                source_interval: source.to_string(),
                target: target.to_string(),
                image_lo: image_lo.to_string(),
                image_hi: image_hi.to_string(),
            });
        }
        let compiled = map.compile();
        let source_f64 = (to_f64(source.lo()), to_f64(source.hi()));
        let target_f64 = (to_f64(target.lo()), to_f64(target.hi()));
        Ok(BranchPiece {
            source,
            target,
            map,
            compiled,
            source_f64,
            target_f64,
        })
    }

    /// Increasing affine bijection from `source` onto `target`.
    pub fn affine_onto(source: Interval, target: Interval) -> Result<Self, PieceError> {
        let slope = target.length() / source.length();
        let intercept = target.lo() - &slope * source.lo();
        Self::new(source, target, MapKind::affine(slope, intercept))
    }

    pub fn source(&self) -> &Interval {
        &self.source
    }

    pub fn target(&self) -> &Interval {
        &self.target
    }

    pub fn map(&self) -> &MapKind {
        &self.map
    }

    pub fn compiled(&self) -> &CompiledMap {
        &self.compiled
    }

    pub fn is_increasing(&self) -> bool {
        let f = &self.compiled;
        f.forward(self.source_f64.1) >= f.forward(self.source_f64.0)
    }

    #[inline]
    pub fn source_contains(&self, x: f64) -> bool {
        self.source_f64.0 <= x && x < self.source_f64.1
    }

    #[inline]
    pub fn target_contains(&self, y: f64) -> bool {
        self.target_f64.0 <= y && y < self.target_f64.1
    }

    pub fn source_bounds(&self) -> (f64, f64) {
        self.source_f64
    }

    pub fn target_bounds(&self) -> (f64, f64) {
        self.target_f64
    }

    /// Constant `|slope|` of an affine piece.
    pub fn constant_derivative(&self) -> Option<Rational> {
        match &self.map {
            MapKind::Affine { slope, .. } => Some(slope.abs()),
            MapKind::Quadratic { .. } => None,
        }
    }

    /// `count` equally spaced interior sample points of the source.
    pub fn source_samples(&self, count: usize) -> impl Iterator<Item = f64> + '_ {
        let (lo, hi) = self.source_f64;
        let width = (hi - lo) / count as f64;
        (0..count).map(move |k| lo + (k as f64 + 0.5) * width)
    }
}

/// `max |Φ_{g∘f}(x) − Φ_g(f(x))·Φ_f(x)|` over `samples` points of the inner
/// piece's source, with `Φ_{g∘f}` taken from the composed closed form.
///
/// `None` when `inner`'s target is not inside `outer`'s source or the pair
/// has no closed-form composition.
pub fn chain_rule_residual(outer: &BranchPiece, inner: &BranchPiece, samples: usize) -> Option<f64> {
    if inner.target.lo() < outer.source.lo() || inner.target.hi() > outer.source.hi() {
        return None;
    }
    let composed = MapKind::compose(&outer.map, &inner.map)?.compile();
    let worst = inner
        .source_samples(samples)
        .map(|x| {
            let direct = composed.forward_derivative(x);
            let product =
                outer.compiled.forward_derivative(inner.compiled.forward(x)) * inner.compiled.forward_derivative(x);
            (direct - product).abs()
        })
        .fold(0.0, f64::max);
    Some(worst)
}

/// `max |Φ_f(x)·Φ_{f⁻¹}(f(x)) − 1|` over interior samples of the source.
pub fn reciprocal_residual(piece: &BranchPiece, samples: usize) -> f64 {
    piece
        .source_samples(samples)
        .map(|x| {
            let f = piece.compiled;
            (f.forward_derivative(x) * f.inverse_derivative(f.forward(x)) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MapKind::Affine { slope, intercept } => write!(f, "y = {slope}·x + {intercept}"),
            MapKind::Quadratic {
                coeff,
                vertex,
                offset,
                side,
            } => {
                let sign = if *side == Orientation::Increasing { "+" } else { "−" };
                if offset.is_zero() {
                    write!(f, "y = {vertex} {sign} sqrt(x / {coeff})")
                } else {
                    write!(f, "y = {vertex} {sign} sqrt((x − {offset}) / {coeff})")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::rational;

    fn iv(lo: Rational, hi: Rational) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn affine_endpoints_checked() {
        let p = BranchPiece::affine_onto(iv(integer(1), integer(2)), iv(integer(1), rational(3, 2))).unwrap();
        assert_eq!(p.constant_derivative(), Some(rational(1, 2)));
        let bad = BranchPiece::new(
            iv(integer(0), integer(1)),
            iv(integer(0), integer(1)),
            MapKind::affine(rational(1, 2), integer(0)),
        );
        assert!(matches!(bad, Err(PieceError::EndpointMismatch { .. })));
        let zero = BranchPiece::new(
            iv(integer(0), integer(1)),
            iv(integer(0), integer(1)),
            MapKind::affine(integer(0), integer(0)),
        );
        assert_eq!(zero, Err(PieceError::ZeroSlope));
    }

    #[test]
    fn decreasing_affine_piece() {
        // y = 1 − x maps [0,1) onto (0,1]
        let p = BranchPiece::new(
            iv(integer(0), integer(1)),
            iv(integer(0), integer(1)),
            MapKind::affine(integer(-1), integer(1)),
        )
        .unwrap();
        assert!(!p.is_increasing());
    }

    #[test]
    fn quadratic_piece_closed_forms() {
        // inverse of y = (x − 1)² on [1, 2): f(y) = 1 + sqrt(y)
        let p = BranchPiece::new(
            iv(integer(0), integer(1)),
            iv(integer(1), integer(2)),
            MapKind::quadratic(integer(1), integer(1), Orientation::Increasing),
        )
        .unwrap();
        let f = p.compiled();
        let y = 0.36;
        assert!((f.forward(y) - 1.6).abs() < 1e-15);
        assert!((f.forward_derivative(y) - 1.0 / (2.0 * 0.6)).abs() < 1e-15);
        assert!((f.inverse(1.6) - y).abs() < 1e-15);
        assert!(reciprocal_residual(&p, 1000) < 1e-12);
    }

    #[test]
    fn quadratic_straddling_vertex_rejected() {
        let r = BranchPiece::new(
            iv(integer(0), integer(1)),
            iv(integer(0), integer(2)),
            MapKind::quadratic(integer(1), integer(1), Orientation::Increasing),
        );
        assert!(matches!(r, Err(PieceError::NotMonotone { .. })));
    }

    #[test]
    fn forward_exact_detects_perfect_squares() {
        let m = MapKind::quadratic(integer(2), integer(3), Orientation::Decreasing);
        // 3 − sqrt(1/2 / 2) = 3 − 1/2
        assert_eq!(m.forward_exact(&rational(1, 2)), (rational(5, 2), 0.0));
        let (approx, bound) = m.forward_exact(&integer(1));
        assert!(bound > 0.0 && bound < 1e-11);
        assert!((to_f64(&approx) - (3.0 - 0.5f64.sqrt())).abs() <= bound);
    }

    #[test]
    fn compositions_stay_closed_form() {
        let q = MapKind::quadratic(integer(2), integer(3), Orientation::Decreasing);
        let a = MapKind::affine(rational(-1, 2), integer(1));
        let qa = MapKind::compose(&q, &a).unwrap().compile();
        let aq = MapKind::compose(&a, &q).unwrap().compile();
        let (qc, ac) = (q.compile(), a.compile());
        for &x in &[0.1, 0.7, 1.3] {
            assert!((qa.forward(x) - qc.forward(ac.forward(x))).abs() < 1e-14);
        }
        for &x in &[0.1, 0.7, 1.9] {
            assert!((aq.forward(x) - ac.forward(qc.forward(x))).abs() < 1e-14);
        }
        assert!(MapKind::compose(&q, &q).is_none());
    }
}
