use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sqm_core::markov::{simulate, InitialCondition, SimulationOptions};
use sqm_core::stats::MeanEstimate;

use super::Run;
use crate::manifest::Check;
use crate::setup::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub model: ModelSpec,
    pub dim: usize,
    /// Defaults to the origin.
    pub initial: Option<InitialCondition>,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub record_stride: usize,
    pub max_z: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            model: ModelSpec::Brownian { nu: 0.5 },
            dim: 1,
            initial: None,
            horizon: 1.0,
            dt: 1e-3,
            paths: 2000,
            record_stride: 100,
            max_z: 4.0,
        }
    }
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    if p.dim == 0 {
        bail!("dim must be at least 1");
    }
    let model = p.model.model(p.dim)?;
    let initial = p.initial.clone().unwrap_or_else(|| InitialCondition::Point(vec![0.0; p.dim]));
    let options = SimulationOptions::new(p.horizon, p.dt, p.paths, run.seed).with_record_stride(p.record_stride);
    let ens = simulate(&model, &initial, &options)?;
    run.write_with("trajectories.csv", |w| ens.write_csv(w))?;

    let last = ens.recorded_steps.len() - 1;
    let t = ens.times()[last];
    let mut axes = Vec::new();
    for k in 0..p.dim {
        let x = ens.column(last, k);
        let mean = MeanEstimate::from_samples(&x);
        let sq: Vec<f64> = x.iter().map(|v| (v - mean.mean).powi(2)).collect();
        let var = MeanEstimate::from_samples(&sq);
        let (m0, v0) = match &initial {
            InitialCondition::Point(x0) => (x0[k], 0.0),
            InitialCondition::Gaussian { mean, std } => (mean[k], std[k] * std[k]),
        };
        let (em, ev) = p.model.moments(m0, v0, t);
        run.check(Check::z_score(format!("mean of axis {k} at t = {t}"), mean.mean, mean.stderr, em, p.max_z));
        run.check(Check::z_score(format!("variance of axis {k} at t = {t}"), var.mean, var.stderr, ev, p.max_z));
        axes.push(json!({ "axis": k, "mean": mean, "variance": var, "expected_mean": em, "expected_variance": ev }));
    }
    run.write_json("moments.json", &json!({ "time": t, "paths": ens.paths(), "axes": axes }))
}
