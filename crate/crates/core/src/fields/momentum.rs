//! Position <-> momentum transform by direct quadrature.
//!
//! Forward: `Psi~(p) = sum_x Psi(x) exp(-i p.x / hbar) h^d`.
//! Inverse: `Psi(x) = (2 pi hbar)^-d sum_p Psi~(p) exp(i p.x / hbar) dp^d`.
//! Momenta along an axis with `n` nodes and spacing `h` are
//! `p_k = 2 pi hbar k / (n h)` for `k = -floor(n/2) .. n - 1 - floor(n/2)`, which
//! makes the pair an exact inverse on the grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Boundary, ComplexField, Field, Grid};
use crate::error::{invalid, Result};

/// Relative boundary amplitude above which the quadrature is flagged.
pub const LEAK_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumAxis {
    pub n: usize,
    pub dp: f64,
}

impl MomentumAxis {
    fn offset(&self) -> i64 {
        (self.n / 2) as i64
    }

    pub fn momentum(&self, k: usize) -> f64 {
        (k as i64 - self.offset()) as f64 * self.dp
    }

    pub fn max_momentum(&self) -> f64 {
        self.momentum(0).abs().max(self.momentum(self.n - 1).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSpectrum {
    position_grid: Grid,
    position_boundary: Boundary,
    hbar: f64,
    axes: Vec<MomentumAxis>,
    values: Vec<Complex64>,
    support_radius: Option<f64>,
    margin: Option<f64>,
    diagnostics: Vec<String>,
}

fn momentum_axes(grid: &Grid, hbar: f64) -> Vec<MomentumAxis> {
    grid.axes()
        .iter()
        .map(|a| MomentumAxis {
            n: a.n,
            dp: 2.0 * PI * hbar / (a.n as f64 * a.spacing()),
        })
        .collect()
}

/// Phase table `T[k][j]` for one axis, scaled by `scale`.
fn phase_table(n: usize, x0: f64, h: f64, sign: f64, scale: f64) -> Vec<Complex64> {
    let off = (n / 2) as i64;
    let shift = x0 / (n as f64 * h);
    let mut t = Vec::with_capacity(n * n);
    for k in 0..n {
        let kk = k as i64 - off;
        let base = (kk as f64 * shift).rem_euclid(1.0);
        for j in 0..n {
            let m = (kk * j as i64).rem_euclid(n as i64) as f64 / n as f64;
            let theta = sign * 2.0 * PI * (m + base);
            t.push(Complex64::from_polar(scale, theta));
        }
    }
    t
}

fn transform_axis(values: &mut [Complex64], grid: &Grid, axis: usize, table: &[Complex64]) {
    let n = grid.axis(axis).n;
    let stride = grid.stride(axis);
    let block = n * stride;
    let mut buf = vec![Complex64::default(); n];
    for outer in 0..grid.len() / block {
        for inner in 0..stride {
            let start = outer * block + inner;
            for j in 0..n {
                buf[j] = values[start + j * stride];
            }
            for k in 0..n {
                let row = &table[k * n..(k + 1) * n];
                let mut acc = Complex64::default();
                for j in 0..n {
                    acc += row[j] * buf[j];
                }
                values[start + k * stride] = acc;
            }
        }
    }
}

/// Forward transform. A boundary amplitude above `LEAK_THRESHOLD` of the peak
/// on any non-periodic field is reported in the diagnostics.
pub fn to_momentum(psi: &ComplexField, hbar: f64) -> Result<MomentumSpectrum> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return invalid("hbar must be positive and finite");
    }
    let grid = psi.grid().clone();
    let mut diagnostics = Vec::new();
    if psi.boundary() != Boundary::Periodic {
        let peak = psi.max_abs();
        let edge = (0..grid.len())
            .filter(|&i| grid.is_edge(i))
            .map(|i| psi.values()[i].norm())
            .fold(0.0, f64::max);
        if peak > 0.0 && edge > LEAK_THRESHOLD * peak {
            diagnostics.push(format!(
                "boundary leak: edge amplitude {:.3e} of peak exceeds {LEAK_THRESHOLD:.0e}; the grid does not cover the packet",
                edge / peak
            ));
        }
    }
    let mut values = psi.values().to_vec();
    for axis in 0..grid.dim() {
        let a = grid.axis(axis);
        let table = phase_table(a.n, a.min, a.spacing(), -1.0, a.spacing());
        transform_axis(&mut values, &grid, axis, &table);
    }
    Ok(MomentumSpectrum {
        axes: momentum_axes(&grid, hbar),
        position_grid: grid,
        position_boundary: psi.boundary(),
        hbar,
        values,
        support_radius: None,
        margin: None,
        diagnostics,
    })
}

impl MomentumSpectrum {
    /// Spectrum given by a function of momentum on the grid dual to `grid`.
    pub fn from_fn(
        grid: Grid,
        boundary: Boundary,
        hbar: f64,
        f: impl Fn(&[f64]) -> Complex64,
    ) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return invalid("hbar must be positive and finite");
        }
        let axes = momentum_axes(&grid, hbar);
        let d = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let m = grid.multi_index(idx);
            let mut p = [0.0; 3];
            for k in 0..d {
                p[k] = axes[k].momentum(m[k]);
            }
            let v = f(&p[..d]);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return invalid("spectrum function returned a non-finite value");
            }
            values.push(v);
        }
        Ok(MomentumSpectrum {
            position_grid: grid,
            position_boundary: boundary,
            hbar,
            axes,
            values,
            support_radius: None,
            margin: None,
            diagnostics: Vec::new(),
        })
    }

    /// Zero every value with `|p| > (1 - margin) * reference`, recording the
    /// support radius.
    pub fn restrict_support(mut self, reference: f64, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin < 1.0) {
            return invalid("support margin must lie in (0, 1)");
        }
        if !(reference > 0.0 && reference.is_finite()) {
            return invalid("support reference momentum must be positive");
        }
        let p_max = (1.0 - margin) * reference;
        for idx in 0..self.values.len() {
            if self.momentum_norm(idx) > p_max {
                self.values[idx] = Complex64::default();
            }
        }
        self.support_radius = Some(p_max);
        self.margin = Some(margin);
        Ok(self)
    }

    pub fn axes(&self) -> &[MomentumAxis] {
        &self.axes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn margin(&self) -> Option<f64> {
        self.margin
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    pub fn position_grid(&self) -> &Grid {
        &self.position_grid
    }

    pub fn momentum(&self, idx: usize) -> [f64; 3] {
        let m = self.position_grid.multi_index(idx);
        let mut p = [0.0; 3];
        for (k, a) in self.axes.iter().enumerate() {
            p[k] = a.momentum(m[k]);
        }
        p
    }

    pub fn momentum_norm(&self, idx: usize) -> f64 {
        let p = self.momentum(idx);
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    }

    /// Momentum-space volume element `dp^d`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.dp).product()
    }

    /// `(2 pi hbar)^-d sum |Psi~|^2 dp^d`, equal to the position-space norm.
    pub fn norm_sqr(&self) -> f64 {
        let d = self.axes.len() as i32;
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        s * self.cell_volume() / (2.0 * PI * self.hbar).powi(d)
    }

    /// Expectation of a function of momentum under `|Psi~|^2`, normalised.
    pub fn expect(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            let w = v.norm_sqr();
            if w > 0.0 {
                num += w * f(&self.momentum(idx));
                den += w;
            }
        }
        num / den
    }

    pub fn to_position(&self) -> ComplexField {
        let grid = &self.position_grid;
        let mut values = self.values.clone();
        for axis in 0..grid.dim() {
            let a = grid.axis(axis);
            let table = phase_table(a.n, a.min, a.spacing(), 1.0, 1.0 / (a.n as f64 * a.spacing()));
            // The inverse table is the transpose of the conjugated forward one.
            let n = a.n;
            let mut tr = vec![Complex64::default(); n * n];
            for k in 0..n {
                for j in 0..n {
                    tr[j * n + k] = table[k * n + j];
                }
            }
            transform_axis(&mut values, grid, axis, &tr);
        }
        Field::from_parts(grid.clone(), self.position_boundary, values)
    }
}
