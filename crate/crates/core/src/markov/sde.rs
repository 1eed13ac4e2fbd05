use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MarkovModel;
use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

/// Distribution of `x(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    Point(Vec<f64>),
    /// Independent normal coordinates with the given means and standard deviations.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

impl InitialCondition {
    fn dim(&self) -> usize {
        match self {
            InitialCondition::Point(x) => x.len(),
            InitialCondition::Gaussian { mean, .. } => mean.len(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return invalid(format!("initial condition has dimension {}, model has {dim}", self.dim()));
        }
        match self {
            InitialCondition::Point(x) if x.iter().any(|v| !v.is_finite()) => invalid("initial point must be finite"),
            InitialCondition::Gaussian { mean, std }
                if std.len() != dim || mean.iter().chain(std).any(|v| !v.is_finite()) || std.iter().any(|&s| s < 0.0) =>
            {
                invalid("initial Gaussian needs finite means and finite non-negative deviations per axis")
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            InitialCondition::Point(x) => out.copy_from_slice(x),
            InitialCondition::Gaussian { mean, std } => {
                for k in 0..out.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    out[k] = mean[k] + std[k] * z;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    /// Horizon T (s).
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Keep every `record_stride`-th step; the final step is always kept.
    pub record_stride: usize,
}

impl SimulationOptions {
    pub fn new(horizon: f64, dt: f64, paths: usize, seed: u64) -> Self {
        SimulationOptions {
            horizon,
            dt,
            paths,
            seed,
            record_stride: 1,
        }
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Number of Euler–Maruyama steps, `T/dt` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid("time step must be positive");
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return invalid("horizon must be finite and >= 0");
        }
        if self.paths == 0 {
            return invalid("at least one path is required");
        }
        if self.record_stride == 0 {
            return invalid("record stride must be >= 1");
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return invalid(format!("horizon {} is not a whole number of steps of {}", self.horizon, self.dt));
        }
        Ok(())
    }

    fn recorded_steps(&self) -> Vec<usize> {
        let steps = self.steps();
        let mut r: Vec<usize> = (0..=steps).step_by(self.record_stride).collect();
        if *r.last().unwrap() != steps {
            r.push(steps);
        }
        r
    }
}

/// Euler–Maruyama integration of one path. `visit(step, x)` sees the state
/// after every step including step 0 and returns `false` to stop early.
pub(crate) fn integrate_path<R: Rng>(
    model: &MarkovModel,
    x: &mut [f64],
    dt: f64,
    steps: usize,
    rng: &mut R,
    mut visit: impl FnMut(usize, &[f64]) -> bool,
) -> std::result::Result<(), (usize, String)> {
    let d = model.dim;
    let amp = (2.0 * model.nu * dt).sqrt();
    let mut b = [0.0; 3];
    if !visit(0, x) {
        return Ok(());
    }
    for step in 1..=steps {
        model.drift_at(x, &mut b[..d]);
        if let Some(k) = b[..d].iter().position(|v| !v.is_finite()) {
            return Err((step, format!("drift component {k} is not finite at {:?}", &x[..d])));
        }
        for k in 0..d {
            let z: f64 = if amp > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            x[k] += b[k] * dt + amp * z;
        }
        if !visit(step, x) {
            return Ok(());
        }
    }
    Ok(())
}

/// Sampled paths of the diffusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub dim: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Step index of every recorded sample.
    pub recorded_steps: Vec<usize>,
    /// Per path, `recorded_steps.len() * dim` coordinates, sample-major.
    pub positions: Vec<Vec<f64>>,
}

impl TrajectoryEnsemble {
    pub fn paths(&self) -> usize {
        self.positions.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.recorded_steps.iter().map(|&s| s as f64 * self.dt).collect()
    }

    pub fn position(&self, path: usize, record: usize) -> &[f64] {
        &self.positions[path][record * self.dim..(record + 1) * self.dim]
    }

    pub fn final_position(&self, path: usize) -> &[f64] {
        self.position(path, self.recorded_steps.len() - 1)
    }

    /// Coordinate `axis` of every path at record `record`.
    pub fn column(&self, record: usize, axis: usize) -> Vec<f64> {
        self.positions.iter().map(|p| p[record * self.dim + axis]).collect()
    }

    /// Index of the record taken at step `step`, if any.
    pub fn record_at_step(&self, step: usize) -> Option<usize> {
        self.recorded_steps.binary_search(&step).ok()
    }

    /// CSV with header `t,path_id,x[,y,z]`, one row per path and record.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names = ["x", "y", "z"];
        writeln!(w, "t,path_id,{}", names[..self.dim].join(","))?;
        let times = self.times();
        for (p, pos) in self.positions.iter().enumerate() {
            for (r, t) in times.iter().enumerate() {
                write!(w, "{t:e},{p}")?;
                for v in &pos[r * self.dim..(r + 1) * self.dim] {
                    write!(w, ",{v:e}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Euler–Maruyama ensemble. Path `i` draws from its own stream seeded by
/// `(seed, i)`, so no path depends on the path count or on the thread layout.
pub fn simulate(model: &MarkovModel, x0: &InitialCondition, options: &SimulationOptions) -> Result<TrajectoryEnsemble> {
    options.validate()?;
    x0.validate(model.dim)?;
    let d = model.dim;
    let steps = options.steps();
    let recorded = options.recorded_steps();
    let positions: Vec<Vec<f64>> = (0..options.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(options.seed, i as u64);
            let mut x = [0.0; 3];
            x0.draw(&mut rng, &mut x[..d]);
            let mut out = Vec::with_capacity(recorded.len() * d);
            let mut next = 0;
            integrate_path(model, &mut x[..d], options.dt, steps, &mut rng, |step, x| {
                if recorded.get(next) == Some(&step) {
                    out.extend_from_slice(x);
                    next += 1;
                }
                true
            })
            .map_err(|(step, reason)| Error::Simulation { path: i, step, reason })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(TrajectoryEnsemble {
        dim: d,
        dt: options.dt,
        horizon: options.horizon,
        seed: options.seed,
        recorded_steps: recorded,
        positions,
    })
}
