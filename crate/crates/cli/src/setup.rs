//! Config fragments shared by several experiments.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use sqm_core::markov::MarkovModel;
use sqm_core::{Axis, Boundary, Grid, ScalarField};

/// The line `[-half_extent, half_extent]` with `nodes` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub half_extent: f64,
    pub nodes: usize,
}

impl LineSpec {
    pub fn grid(&self) -> Result<Grid> {
        if !(self.half_extent > 0.0 && self.half_extent.is_finite()) {
            bail!("line half-extent must be positive and finite, got {}", self.half_extent);
        }
        Ok(Grid::new(vec![Axis::new(-self.half_extent, self.half_extent, self.nodes)])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    /// `m_omega2 x² / 2`.
    Harmonic { m_omega2: f64 },
    /// `slope x`.
    Linear { slope: f64 },
    /// `a x⁴ − b x²`.
    DoubleWell { a: f64, b: f64 },
}

impl PotentialSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Harmonic { m_omega2 } => 0.5 * m_omega2 * x * x,
            PotentialSpec::Linear { slope } => slope * x,
            PotentialSpec::DoubleWell { a, b } => a * x.powi(4) - b * x * x,
        }
    }

    /// `V'(x) = k x + s` when the potential is at most quadratic.
    pub fn affine_gradient(&self) -> Option<(f64, f64)> {
        match *self {
            PotentialSpec::Zero => Some((0.0, 0.0)),
            PotentialSpec::Harmonic { m_omega2 } => Some((m_omega2, 0.0)),
            PotentialSpec::Linear { slope } => Some((0.0, slope)),
            PotentialSpec::DoubleWell { .. } => None,
        }
    }

    pub fn field(&self, grid: &Grid, boundary: Boundary) -> Result<ScalarField> {
        let spec = *self;
        if !(0..grid.len()).all(|i| spec.eval(grid.coords(i)[0]).is_finite()) {
            bail!("potential coefficients must be finite");
        }
        Ok(ScalarField::from_fn(grid.clone(), boundary, move |x| spec.eval(x[0]))?)
    }
}

/// Drift-free or Ornstein–Uhlenbeck process centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Brownian { nu: f64 },
    OrnsteinUhlenbeck { rate: f64, nu: f64 },
}

impl ModelSpec {
    pub fn model(&self, dim: usize) -> Result<MarkovModel> {
        Ok(match *self {
            ModelSpec::Brownian { nu } => MarkovModel::brownian(nu, dim)?,
            ModelSpec::OrnsteinUhlenbeck { rate, nu } => MarkovModel::ornstein_uhlenbeck(rate, nu, dim)?,
        })
    }

    pub fn rate(&self) -> f64 {
        match *self {
            ModelSpec::Brownian { .. } => 0.0,
            ModelSpec::OrnsteinUhlenbeck { rate, .. } => rate,
        }
    }

    pub fn nu(&self) -> f64 {
        match *self {
            ModelSpec::Brownian { nu } | ModelSpec::OrnsteinUhlenbeck { nu, .. } => nu,
        }
    }

    /// Mean and variance at time `t` of one coordinate started from a normal
    /// law with mean `m0` and variance `v0`.
    pub fn moments(&self, m0: f64, v0: f64, t: f64) -> (f64, f64) {
        let (g, nu) = (self.rate(), self.nu());
        if g == 0.0 {
            (m0, v0 + 2.0 * nu * t)
        } else {
            let e = (-g * t).exp();
            (m0 * e, v0 * e * e - nu / g * (-2.0 * g * t).exp_m1())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_documents_parse_strictly() {
        let v: PotentialSpec = serde_json::from_str(r#"{"kind": "harmonic", "m_omega2": 2.0}"#).unwrap();
        assert_eq!(v.eval(1.0), 1.0);
        assert_eq!(v.affine_gradient(), Some((2.0, 0.0)));
        let w: PotentialSpec = serde_json::from_str(r#"{"kind": "double-well", "a": 1.0, "b": 2.0}"#).unwrap();
        assert_eq!(w.eval(1.0), -1.0);
        assert!(w.affine_gradient().is_none());
        assert!(serde_json::from_str::<PotentialSpec>(r#"{"kind": "harmonic", "m_omega2": 2.0, "x": 1}"#).is_err());
        assert!(serde_json::from_str::<PotentialSpec>(r#"{"kind": "cubic"}"#).is_err());
    }

    #[test]
    fn model_moments_reduce_to_brownian_at_zero_rate() {
        let b = ModelSpec::Brownian { nu: 0.5 };
        assert_eq!(b.moments(1.0, 0.0, 2.0), (1.0, 2.0));
        let ou = ModelSpec::OrnsteinUhlenbeck { rate: 1e-9, nu: 0.5 };
        let (m, v) = ou.moments(1.0, 0.0, 2.0);
        assert!((m - 1.0).abs() < 1e-8 && (v - 2.0).abs() < 1e-8);
        let stationary = ModelSpec::OrnsteinUhlenbeck { rate: 2.0, nu: 0.5 };
        assert!((stationary.moments(0.0, 0.25, 3.0).1 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn line_rejects_bad_extent() {
        assert!(LineSpec { half_extent: 0.0, nodes: 10 }.grid().is_err());
        assert_eq!(LineSpec { half_extent: 2.0, nodes: 5 }.grid().unwrap().len(), 5);
    }
}
