//! Bounded search domains, unit-cube scaling and Latin-hypercube designs.
//!
//! All surrogate modelling and acquisition search happens in unit-cube
//! coordinates; native coordinates are only used at the objective boundary
//! and in exported artifacts.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `lower[i] <= x[i] <= upper[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<String>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let names = (0..lower.len()).map(|i| format!("x{}", i + 1)).collect();
        Self::with_names(lower, upper, names)
    }

    pub fn with_names(lower: Vec<f64>, upper: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::arg("search space needs at least one dimension"));
        }
        if lower.len() != upper.len() || names.len() != lower.len() {
            return Err(Error::arg(format!(
                "bound/name length mismatch: {} lower, {} upper, {} names",
                lower.len(),
                upper.len(),
                names.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::arg(format!(
                    "dimension {i}: lower bound {lo} must be finite and below upper bound {hi}"
                )));
            }
        }
        Ok(SearchSpace {
            lower,
            upper,
            names,
        })
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(dims: usize) -> Result<Self> {
        Self::new(vec![0.0; dims], vec![1.0; dims])
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::arg(format!(
                "point has {} coordinates, space has {}",
                x.len(),
                self.dims()
            )));
        }
        Ok(())
    }

    /// Validates that `x` lies inside the box.
    pub fn check(&self, x: &[f64]) -> Result<()> {
        self.check_len(x)?;
        for (index, &value) in x.iter().enumerate() {
            let (lower, upper) = (self.lower[index], self.upper[index]);
            if !(value >= lower && value <= upper) {
                return Err(Error::Domain {
                    index,
                    value,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check(x).is_ok()
    }

    /// Affine map of a native point onto the unit cube.
    pub fn to_unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.lower[i]) / (self.upper[i] - self.lower[i]))
            .collect())
    }

    /// Inverse of [`to_unit`](Self::to_unit). Results are clamped into the box.
    pub fn from_unit(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        Ok(u.iter()
            .enumerate()
            .map(|(i, &v)| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                (lo + v * (hi - lo)).clamp(lo, hi)
            })
            .collect())
    }
}

/// A set of points inside a search space, one per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    dims: usize,
    points: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(dims: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = points.iter().position(|p| p.len() != dims) {
            return Err(Error::arg(format!(
                "row {bad} has {} coordinates, expected {dims}",
                points[bad].len()
            )));
        }
        Ok(DesignMatrix { dims, points })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn rows(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Maps every row from native to unit coordinates.
    pub fn to_unit(&self, space: &SearchSpace) -> Result<DesignMatrix> {
        let points = self
            .points
            .iter()
            .map(|p| space.to_unit(p))
            .collect::<Result<Vec<_>>>()?;
        DesignMatrix::new(self.dims, points)
    }

    /// Maps every row from unit to native coordinates.
    pub fn from_unit(&self, space: &SearchSpace) -> Result<DesignMatrix> {
        let points = self
            .points
            .iter()
            .map(|p| space.from_unit(p))
            .collect::<Result<Vec<_>>>()?;
        DesignMatrix::new(self.dims, points)
    }

    /// Writes the design as CSV with one header column per dimension name.
    pub fn write_csv<W: Write>(&self, names: &[String], writer: W) -> Result<()> {
        if names.len() != self.dims {
            return Err(Error::arg("header names must match design dimension"));
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(names)?;
        for p in &self.points {
            w.write_record(p.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default seed design size, ten points per dimension.
pub fn default_seed_count(dims: usize) -> usize {
    10 * dims
}

/// Regular mesh of `per_dim` points per axis in unit coordinates,
/// endpoints included, first coordinate varying slowest.
pub fn unit_grid(dims: usize, per_dim: usize) -> Result<Vec<Vec<f64>>> {
    if dims == 0 || per_dim == 0 {
        return Err(Error::arg("grid needs at least one dimension and one point per axis"));
    }
    let total = per_dim
        .checked_pow(dims as u32)
        .filter(|&t| t <= 10_000_000)
        .ok_or_else(|| Error::Resource(format!("{per_dim}^{dims} grid is too large")))?;
    let axis = |i: usize| {
        if per_dim == 1 {
            0.5
        } else {
            i as f64 / (per_dim - 1) as f64
        }
    };
    Ok((0..total)
        .map(|mut k| {
            let mut p = vec![0.0; dims];
            for j in (0..dims).rev() {
                p[j] = axis(k % per_dim);
                k /= per_dim;
            }
            p
        })
        .collect())
}

/// Latin-hypercube design in unit coordinates.
///
/// Each dimension gets an independent Fisher-Yates permutation of the `n`
/// strata and a uniform jitter inside its stratum. The jitter is kept a
/// hair away from the stratum edges so that rescaling to native units and
/// back can never push a point into a neighbouring stratum.
pub fn unit_latin_hypercube<R: Rng + ?Sized>(
    dims: usize,
    n: usize,
    rng: &mut R,
) -> Result<DesignMatrix> {
    if n == 0 {
        return Err(Error::arg("latin hypercube needs n >= 1"));
    }
    if dims == 0 {
        return Err(Error::arg("latin hypercube needs dims >= 1"));
    }
    const EDGE: f64 = 1e-9;
    let mut points = vec![vec![0.0; dims]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..dims {
        strata.shuffle(rng);
        for (row, &s) in points.iter_mut().zip(&strata) {
            let jitter: f64 = rng.random_range(EDGE..1.0 - EDGE);
            row[j] = (s as f64 + jitter) / n as f64;
        }
    }
    DesignMatrix::new(dims, points)
}

/// Latin-hypercube design of `n` points in native coordinates of `space`.
pub fn latin_hypercube<R: Rng + ?Sized>(
    space: &SearchSpace,
    n: usize,
    rng: &mut R,
) -> Result<DesignMatrix> {
    unit_latin_hypercube(space.dims(), n, rng)?.from_unit(space)
}
