//! Fields sampled on uniform Cartesian grids in one to three dimensions.
//!
//! Storage is row-major with the last axis fastest. Every field carries the
//! [`Boundary`] mode its differential operators use, so the convention travels
//! with the data.

mod io;
mod momentum;
mod ops;

pub use io::{read_csv, write_csv, FieldMeta};
pub use momentum::{to_momentum, MomentumAxis, MomentumSpectrum};
pub use ops::{derivative, divergence, gradient, integrate, laplacian, laplacian_into, second_derivative};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Scalar;

pub const MIN_POINTS_PER_AXIS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Self {
        Axis { min, max, n }
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }
}

/// How differential operators treat the edge nodes of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// The field vanishes one spacing beyond either end.
    #[default]
    Dirichlet,
    /// Axis wraps with period `n * h`; the node at `max` is one spacing short
    /// of the image of the node at `min`.
    Periodic,
    /// One-sided second-order stencils at the ends, no assumption about the
    /// exterior.
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return invalid(format!("grid dimension must be 1, 2 or 3 (got {})", axes.len()));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.n < MIN_POINTS_PER_AXIS {
                return invalid(format!(
                    "axis {k} has {} points; at least {MIN_POINTS_PER_AXIS} are required",
                    a.n
                ));
            }
            if !(a.min.is_finite() && a.max.is_finite()) || a.max <= a.min {
                return invalid(format!("axis {k} extent [{}, {}] is not a finite increasing interval", a.min, a.max));
            }
        }
        Ok(Grid { axes })
    }

    /// Same extent and point count on every axis.
    pub fn uniform(dim: usize, min: f64, max: f64, n: usize) -> Result<Self> {
        Grid::new(vec![Axis::new(min, max, n); dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.axes[k].spacing()
    }

    /// Distance between linear indices of neighbours along axis `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.axes[k + 1..].iter().map(|a| a.n).product()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].n;
            out[k] = idx % n;
            idx /= n;
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (k, a) in self.axes.iter().enumerate() {
            idx = idx * a.n + multi[k];
        }
        idx
    }

    /// Coordinates of node `idx`; unused trailing entries are zero.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for (k, a) in self.axes.iter().enumerate() {
            x[k] = a.coordinate(m[k]);
        }
        x
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// Quadrature weight of index `i` along axis `k`: trapezoid, or uniform on
    /// periodic axes.
    pub fn axis_weight(&self, k: usize, i: usize, boundary: Boundary) -> f64 {
        let a = &self.axes[k];
        let h = a.spacing();
        if boundary != Boundary::Periodic && (i == 0 || i + 1 == a.n) {
            0.5 * h
        } else {
            h
        }
    }

    pub fn node_weight(&self, idx: usize, boundary: Boundary) -> f64 {
        let m = self.multi_index(idx);
        (0..self.dim()).map(|k| self.axis_weight(k, m[k], boundary)).product()
    }

    pub fn weights(&self, boundary: Boundary) -> Vec<f64> {
        (0..self.len()).map(|i| self.node_weight(i, boundary)).collect()
    }

    /// True when `idx` sits on the edge of any axis.
    pub fn is_edge(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        self.axes.iter().enumerate().any(|(k, a)| m[k] == 0 || m[k] + 1 == a.n)
    }

    /// Largest distance from the grid centre to a corner.
    pub fn circumradius(&self) -> f64 {
        self.axes.iter().map(|a| (0.5 * (a.max - a.min)).powi(2)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (k, a) in self.axes.iter().enumerate() {
            c[k] = 0.5 * (a.min + a.max);
        }
        c
    }

    /// Subsample every `stride`-th node along each axis, keeping both ends when
    /// `(n - 1)` is divisible by `stride`.
    pub fn coarsen(&self, stride: usize) -> Result<Grid> {
        if stride == 0 {
            return invalid("coarsening stride must be >= 1");
        }
        let axes = self
            .axes
            .iter()
            .map(|a| {
                let m = (a.n - 1) / stride;
                Axis::new(a.min, a.min + (m * stride) as f64 * a.spacing(), m + 1)
            })
            .collect();
        Grid::new(axes)
    }
}

/// Real or complex samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    boundary: Boundary,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Scalar> Field<T> {
    pub fn new(grid: Grid, boundary: Boundary, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("field value at node {i} is not finite"));
        }
        Ok(Field { grid, boundary, values })
    }

    /// Internal constructor for operator outputs, which are finite whenever
    /// their inputs are.
    pub(crate) fn from_parts(grid: Grid, boundary: Boundary, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, boundary, values }
    }

    pub fn from_fn(grid: Grid, boundary: Boundary, f: impl Fn(&[f64]) -> T) -> Result<Self> {
        let d = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.coords(i)[..d])).collect();
        Field::new(grid, boundary, values)
    }

    pub fn constant(grid: Grid, boundary: Boundary, value: T) -> Result<Self> {
        let n = grid.len();
        Field::new(grid, boundary, vec![value; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field::from_parts(self.grid.clone(), self.boundary, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map<U: Scalar, V: Scalar>(&self, other: &Field<U>, f: impl Fn(T, U) -> V) -> Result<Field<V>> {
        if self.grid != other.grid {
            return invalid("fields live on different grids");
        }
        Ok(Field::from_parts(
            self.grid.clone(),
            self.boundary,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Multilinear interpolation at `x`; `None` outside non-periodic extents.
    pub fn sample(&self, x: &[f64]) -> Option<T> {
        let d = self.grid.dim();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..d {
            let a = self.grid.axis(k);
            let h = a.spacing();
            let mut s = (x[k] - a.min) / h;
            if self.boundary == Boundary::Periodic {
                s = s.rem_euclid(a.n as f64);
                let i = (s.floor() as usize).min(a.n - 1);
                lo[k] = i;
                hi[k] = (i + 1) % a.n;
                frac[k] = s - i as f64;
            } else {
                if !(s >= 0.0 && s <= (a.n - 1) as f64) {
                    return None;
                }
                let i = (s.floor() as usize).min(a.n - 2);
                lo[k] = i;
                hi[k] = i + 1;
                frac[k] = s - i as f64;
            }
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut m = [0usize; 3];
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    m[k] = hi[k];
                    w *= frac[k];
                } else {
                    m[k] = lo[k];
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += self.values[self.grid.linear_index(&m[..d])] * w;
            }
        }
        Some(acc)
    }
}

impl ComplexField {
    pub fn norm_sqr(&self) -> ScalarField {
        self.map(|z| z.norm_sqr())
    }

    pub fn real(&self) -> ScalarField {
        self.map(|z| z.re)
    }
}

impl ScalarField {
    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One component per grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T = f64> {
    grid: Grid,
    boundary: Boundary,
    components: Vec<Vec<T>>,
}

impl<T: Scalar> VectorField<T> {
    pub fn new(grid: Grid, boundary: Boundary, components: Vec<Vec<T>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return invalid("vector field needs one component per axis");
        }
        for c in &components {
            if c.len() != grid.len() || c.iter().any(|v| !v.is_finite()) {
                return invalid("vector field component has wrong length or non-finite values");
            }
        }
        Ok(VectorField {
            grid,
            boundary,
            components,
        })
    }

    pub(crate) fn from_parts(grid: Grid, boundary: Boundary, components: Vec<Vec<T>>) -> Self {
        VectorField {
            grid,
            boundary,
            components,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn component(&self, k: usize) -> &[T] {
        &self.components[k]
    }

    pub fn component_field(&self, k: usize) -> Field<T> {
        Field::from_parts(self.grid.clone(), self.boundary, self.components[k].clone())
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    /// Value at node `idx`, padded with zeros to three components.
    pub fn at(&self, idx: usize) -> [T; 3] {
        let mut v = [T::zero(); 3];
        for (k, c) in self.components.iter().enumerate() {
            v[k] = c[idx];
        }
        v
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> VectorField<U> {
        VectorField::from_parts(
            self.grid.clone(),
            self.boundary,
            self.components.iter().map(|c| c.iter().map(|&v| f(v)).collect()).collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Pointwise squared Euclidean norm.
    pub fn norm_sqr(&self) -> ScalarField {
        let n = self.grid.len();
        let vals = (0..n).map(|i| self.components.iter().map(|c| c[i].norm_sqr()).sum()).collect();
        Field::from_parts(self.grid.clone(), self.boundary, vals)
    }

    pub fn max_norm(&self) -> f64 {
        self.norm_sqr().values.iter().copied().fold(0.0, f64::max).sqrt()
    }

    pub fn sample(&self, x: &[f64]) -> Option<[T; 3]> {
        let mut out = [T::zero(); 3];
        for k in 0..self.grid.dim() {
            out[k] = self.component_field(k).sample(x)?;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::uniform(1, 0.0, 1.0, 3).is_err());
        assert!(Grid::uniform(4, 0.0, 1.0, 8).is_err());
        assert!(Grid::uniform(2, 1.0, 1.0, 8).is_err());
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 5), Axis::new(-2.0, 2.0, 9)]).unwrap();
        assert_eq!(g.len(), 45);
        assert_eq!(g.stride(0), 9);
        assert_eq!(g.stride(1), 1);
        assert_eq!(g.multi_index(g.linear_index(&[3, 7])), [3, 7, 0]);
        assert_eq!(g.coords(g.linear_index(&[2, 4])), [0.5, 0.0, 0.0]);
    }

    #[test]
    fn field_rejects_bad_values() {
        let g = Grid::uniform(1, 0.0, 1.0, 5).unwrap();
        assert!(ScalarField::new(g.clone(), Boundary::Dirichlet, vec![0.0; 4]).is_err());
        assert!(ScalarField::new(g, Boundary::Dirichlet, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn sample_reproduces_linear_functions() {
        let g = Grid::uniform(2, -1.0, 1.0, 11).unwrap();
        let f = ScalarField::from_fn(g, Boundary::Open, |x| 2.0 * x[0] - x[1] + 0.5).unwrap();
        let v = f.sample(&[0.13, -0.77]).unwrap();
        assert!((v - (0.26 + 0.77 + 0.5)).abs() < 1e-13);
        assert!(f.sample(&[1.2, 0.0]).is_none());
        assert!((f.sample(&[1.0, 1.0]).unwrap() - 1.5).abs() < 1e-13);
    }

    #[test]
    fn coarsen_keeps_extent_when_divisible() {
        let g = Grid::uniform(1, -10.0, 10.0, 1025).unwrap();
        let c = g.coarsen(4).unwrap();
        assert_eq!(c.axis(0).n, 257);
        assert!((c.axis(0).max - 10.0).abs() < 1e-12);
        assert!((c.spacing(0) - 4.0 * g.spacing(0)).abs() < 1e-14);
    }
}
