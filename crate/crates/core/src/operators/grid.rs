//! Piecewise-constant functions on a uniform grid of `[0, L)`.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sets::{to_f64, IntervalUnion, Rational};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("a grid needs at least one cell")]
    NoCells,
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("bins ({bins}) must divide the cell count ({cells})")]
    BadCoarsening { bins: usize, cells: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv row {row}: {message}")]
    Parse { row: usize, message: String },
}

/// A pointwise-evaluable function on the real line.
pub type Field<'a> = Arc<dyn Fn(f64) -> f64 + Send + Sync + 'a>;

/// Values attached to the cells `[kL/n, (k+1)L/n)`; read as the
/// piecewise-constant function equal to `values[k]` on cell `k` and zero
/// outside `[0, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    ambient: Rational,
    length: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(ambient: Rational, values: Vec<f64>) -> Result<Self, GridError> {
        if values.is_empty() {
            return Err(GridError::NoCells);
        }
        Ok(GridFunction {
            length: to_f64(&ambient),
            ambient,
            values,
        })
    }

    pub fn zeros(ambient: Rational, cells: usize) -> Result<Self, GridError> {
        Self::new(ambient, vec![0.0; cells])
    }

    /// Samples `f` at the cell midpoints.
    pub fn from_fn(ambient: Rational, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        if cells == 0 {
            return Err(GridError::NoCells);
        }
        let length = to_f64(&ambient);
        let width = length / cells as f64;
        let values = (0..cells).map(|k| f((k as f64 + 0.5) * width)).collect();
        Self::new(ambient, values)
    }

    /// `χ_S` sampled at midpoints; exact when `S` is grid-aligned.
    pub fn indicator(set: &IntervalUnion, cells: usize) -> Result<Self, GridError> {
        Self::from_fn(set.ambient().clone(), cells, |x| {
            if set.contains_f64(x) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Independent uniform values in `[lo, hi)` per cell.
    pub fn random_uniform<R: Rng>(
        ambient: Rational,
        cells: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self, GridError> {
        let values = (0..cells).map(|_| rng.random_range(lo..hi)).collect();
        Self::new(ambient, values)
    }

    pub fn ambient(&self) -> &Rational {
        &self.ambient
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn width(&self) -> f64 {
        self.length / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.width()
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cells()).map(|k| self.midpoint(k))
    }

    /// Index of the cell containing `x`.
    #[inline]
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(0.0..self.length).contains(&x) {
            return None;
        }
        let n = self.values.len();
        let k = (x * n as f64 / self.length).floor() as usize;
        Some(k.min(n - 1))
    }

    /// Piecewise-constant evaluation; zero outside `[0, L)`.
    #[inline]
    pub fn lookup(&self, x: f64) -> f64 {
        self.cell_of(x).map_or(0.0, |k| self.values[k])
    }

    pub fn as_field(&self) -> Field<'_> {
        Arc::new(move |x| self.lookup(x))
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.ambient == other.ambient && self.cells() == other.cells()
    }

    pub(crate) fn check_grid(&self, other: &GridFunction) -> Result<(), GridError> {
        if !self.same_grid(other) {
            return Err(GridError::Mismatch(format!(
                "{} cells on [0, {}) vs {} cells on [0, {})",
                self.cells(),
                self.ambient,
                other.cells(),
                other.ambient
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            ambient: self.ambient.clone(),
            length: self.length,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction, GridError> {
        self.check_grid(other)?;
        Ok(GridFunction {
            ambient: self.ambient.clone(),
            length: self.length,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, factor: f64) -> GridFunction {
        self.map(|v| v * factor)
    }

    /// `∫ φ` by the midpoint rule.
    pub fn integral(&self) -> f64 {
        self.width() * self.values.iter().sum::<f64>()
    }

    pub fn l1_norm(&self) -> f64 {
        self.width() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.width() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn inner(&self, other: &GridFunction) -> Result<f64, GridError> {
        self.check_grid(other)?;
        Ok(self.width() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn l1_distance(&self, other: &GridFunction) -> Result<f64, GridError> {
        self.check_grid(other)?;
        Ok(self.width()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// `∫_S φ`, weighting each cell value by the measure of its overlap with
    /// `S`. Exact for the piecewise-constant reading of `φ`.
    pub fn integral_over(&self, set: &IntervalUnion) -> f64 {
        let w = self.width();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| {
                let lo = k as f64 * w;
                v * set.overlap_f64(lo, lo + w)
            })
            .sum()
    }

    /// Averages groups of consecutive cells down to `bins` cells.
    pub fn coarsen(&self, bins: usize) -> Result<GridFunction, GridError> {
        let n = self.cells();
        if bins == 0 || !n.is_multiple_of(bins) {
            return Err(GridError::BadCoarsening { bins, cells: n });
        }
        let group = n / bins;
        let values = self
            .values
            .chunks(group)
            .map(|c| c.iter().sum::<f64>() / group as f64)
            .collect();
        GridFunction::new(self.ambient.clone(), values)
    }

    /// CSV with header `midpoint,value`, one row per cell in ascending order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["midpoint", "value"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([self.midpoint(k).to_string(), v.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads the CSV format written by [`GridFunction::write_csv`], checking
    /// that the midpoints are those of a uniform grid on `[0, ambient)`.
    pub fn read_csv<R: Read>(reader: R, ambient: Rational) -> Result<Self, GridError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "midpoint" || &headers[1] != "value" {
            return Err(GridError::Parse {
                row: 1,
                message: format!(
                    "expected header `midpoint,value`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut mids = Vec::new();
        let mut values = Vec::new();
        for (k, record) in r.records().enumerate() {
            let record = record?;
            let row = k + 2;
            let parse = |field: &str| {
                field.trim().parse::<f64>().map_err(|e| GridError::Parse {
                    row,
                    message: format!("`{field}`: {e}"),
                })
            };
            mids.push(parse(&record[0])?);
            values.push(parse(&record[1])?);
        }
        let grid = GridFunction::new(ambient, values)?;
        let slack = 1e-9 * grid.length.max(1.0);
        for (k, m) in mids.iter().enumerate() {
            if (m - grid.midpoint(k)).abs() > slack {
                return Err(GridError::Mismatch(format!(
                    "row {} has midpoint {m}, expected {} for {} cells on [0, {})",
                    k + 2,
                    grid.midpoint(k),
                    grid.cells(),
                    grid.ambient
                )));
            }
        }
        Ok(grid)
    }
}

/// Samples a field at the midpoints of a uniform grid.
pub fn sample(field: &Field<'_>, ambient: &Rational, cells: usize) -> GridFunction {
    GridFunction::from_fn(ambient.clone(), cells, |x| field(x)).expect("cells > 0")
}

/// Midpoint-rule `⟨f, g⟩` on a grid of `cells` cells.
pub fn field_inner(f: &Field<'_>, g: &Field<'_>, length: f64, cells: usize) -> f64 {
    let w = length / cells as f64;
    w * (0..cells)
        .map(|k| {
            let x = (k as f64 + 0.5) * w;
            f(x) * g(x)
        })
        .sum::<f64>()
}

/// `count` seeded test functions with values uniform in `[lo, hi)`.
pub fn random_test_functions(
    ambient: &Rational,
    cells: usize,
    count: usize,
    seed: u64,
    lo: f64,
    hi: f64,
) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| GridFunction::random_uniform(ambient.clone(), cells, lo, hi, &mut rng).expect("cells > 0"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{integer, rational};

    #[test]
    fn norms_by_midpoint_rule() {
        let g = GridFunction::from_fn(integer(1), 4, |x| x).unwrap();
        assert_eq!(g.values(), &[0.125, 0.375, 0.625, 0.875]);
        assert!((g.l1_norm() - 0.5).abs() < 1e-15);
        let expect = (0.25 * (0.125f64.powi(2) + 0.375f64.powi(2) + 0.625f64.powi(2) + 0.875f64.powi(2))).sqrt();
        assert!((g.l2_norm() - expect).abs() < 1e-15);
    }

    #[test]
    fn indicator_on_aligned_set() {
        let set = IntervalUnion::interval(integer(1), rational(1, 4), rational(3, 4)).unwrap();
        let chi = GridFunction::indicator(&set, 8).unwrap();
        assert_eq!(chi.values(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(chi.integral(), 0.5);
    }

    #[test]
    fn lookup_is_half_open() {
        let g = GridFunction::from_fn(integer(1), 4, |x| x).unwrap();
        assert_eq!(g.lookup(0.25), 0.375);
        assert_eq!(g.lookup(0.2499), 0.125);
        assert_eq!(g.lookup(1.0), 0.0);
        assert_eq!(g.lookup(-0.1), 0.0);
    }

    #[test]
    fn integral_over_unaligned_set() {
        let g = GridFunction::from_fn(integer(1), 4, |_| 2.0).unwrap();
        let set = IntervalUnion::interval(integer(1), rational(1, 3), rational(1, 2)).unwrap();
        assert!((g.integral_over(&set) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_and_mismatch() {
        let g = GridFunction::from_fn(integer(2), 8, |x| x * x).unwrap();
        let text = g.to_csv_string();
        assert!(text.starts_with("midpoint,value\n0.125,0.015625\n"));
        let back = GridFunction::read_csv(text.as_bytes(), integer(2)).unwrap();
        assert_eq!(back, g);
        assert!(matches!(
            GridFunction::read_csv(text.as_bytes(), integer(1)),
            Err(GridError::Mismatch(_))
        ));
        assert!(matches!(
            GridFunction::read_csv("x,y\n1,2\n".as_bytes(), integer(1)),
            Err(GridError::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn coarsen_averages() {
        let g = GridFunction::new(integer(1), vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(g.coarsen(2).unwrap().values(), &[2.0, 6.0]);
        assert!(g.coarsen(3).is_err());
    }

    #[test]
    fn seeded_test_functions_are_reproducible() {
        let a = random_test_functions(&integer(1), 16, 3, 7, -1.0, 1.0);
        let b = random_test_functions(&integer(1), 16, 3, 7, -1.0, 1.0);
        assert_eq!(a, b);
        assert!(a.iter().all(|g| g.values().iter().all(|v| (-1.0..1.0).contains(v))));
    }
}
