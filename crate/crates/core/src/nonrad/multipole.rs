use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::{Axis, Boundary, Grid, ScalarField};
use crate::qevolve::{evolve_observed, expect, Observable, WaveFunction};
use crate::units::{ev_to_erg, PhysicalConstants};

/// Log-term dipole test: a free packet evolved with `kT ln|ψ|²` added to
/// the potential, in the units of `constants`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogDipoleConfig {
    pub constants: PhysicalConstants,
    pub kt_ev: f64,
    /// Packet width σ in cm.
    pub width: f64,
    /// Mean momentum in units of `ħ/σ`.
    pub momentum: f64,
    /// Half-width of the line in units of σ.
    pub half_extent: f64,
    pub nodes: usize,
    /// Step in units of `m σ²/ħ`.
    pub dt: f64,
    pub steps_per_sample: usize,
    pub samples: usize,
    pub threshold: f64,
}

impl Default for LogDipoleConfig {
    fn default() -> Self {
        LogDipoleConfig {
            constants: PhysicalConstants::ELECTRON,
            kt_ev: 3.3e-15,
            width: 1e-4,
            momentum: 0.8,
            half_extent: 15.0,
            nodes: 601,
            dt: 5e-5,
            steps_per_sample: 200,
            samples: 12,
            threshold: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDipoleReport {
    pub kt: f64,
    pub times: Vec<f64>,
    pub moment: Vec<f64>,
    pub max_second_derivative: f64,
    /// `q (ħ²/(m²σ³) + kT/(mσ))`.
    pub internal_scale: f64,
    pub ratio: f64,
    pub norm_drift: f64,
    pub pass: bool,
}

pub fn log_dipole_check(config: &LogDipoleConfig) -> Result<LogDipoleReport> {
    let c = &config.constants;
    let sigma = config.width;
    if !(sigma > 0.0 && config.half_extent > 3.0 && config.dt > 0.0) {
        return invalid("width, extent and step must be positive, extent above 3σ");
    }
    if config.samples < 5 || config.steps_per_sample == 0 {
        return invalid("need at least five samples of at least one step");
    }
    let kt = ev_to_erg(config.kt_ev);
    let g = Grid::new(vec![Axis::new(-config.half_extent * sigma, config.half_extent * sigma, config.nodes)])?;
    let p = config.momentum * c.hbar / sigma;
    let wf = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[-sigma], sigma, &[p], c.mass, c.charge, c.hbar)?;
    let v = ScalarField::constant(g, Boundary::Dirichlet, 0.0)?;
    let dt = config.dt * c.mass * sigma * sigma / c.hbar;
    let mut moment = Vec::new();
    let mut times = Vec::new();
    let mut count = 0usize;
    let out = evolve_observed(&wf, &v, kt, dt, config.steps_per_sample * (config.samples - 1), |s| {
        if count.is_multiple_of(config.steps_per_sample) {
            moment.push(c.charge * expect(s, Observable::Position, &v)?[0]);
            times.push(s.time);
        }
        count += 1;
        Ok(())
    })?;
    let big = dt * config.steps_per_sample as f64;
    let max_second_derivative = moment
        .windows(5)
        .map(|w| ((-w[0] + 16.0 * w[1] - 30.0 * w[2] + 16.0 * w[3] - w[4]) / (12.0 * big * big)).abs())
        .fold(0.0, f64::max);
    let internal_scale = c.charge.abs() * (c.hbar * c.hbar / (c.mass * c.mass * sigma.powi(3)) + kt / (c.mass * sigma));
    let ratio = max_second_derivative / internal_scale;
    Ok(LogDipoleReport {
        kt,
        times,
        moment,
        max_second_derivative,
        internal_scale,
        ratio,
        norm_drift: (out.norm() - 1.0).abs(),
        pass: ratio < config.threshold,
    })
}
