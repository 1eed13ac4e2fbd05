use anyhow::Result;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sqm_core::markov::{simulate, InitialCondition, MarkovModel, SimulationOptions};
use sqm_core::rng::stream_seed;
use sqm_core::wiener::{
    brownian_path, covariance_grid, fractal_dimension, one_sided_derivative, refine_path, write_covariance_csv,
};

use super::Run;
use crate::manifest::Check;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FractalParams {
    pub nu: f64,
    pub dt: f64,
    pub steps: usize,
    /// Trace dimension whose estimate is checked against `target`.
    pub dim: usize,
    pub target: f64,
    pub tolerance: f64,
    /// Re-estimate after halving the step by bridge refinement.
    pub refinement: bool,
    pub refinement_tolerance: f64,
    /// Further trace dimensions estimated for comparison only.
    pub context_dims: Vec<usize>,
}

impl Default for FractalParams {
    fn default() -> Self {
        FractalParams {
            nu: 0.5,
            dt: 1.0,
            steps: 1_000_000,
            dim: 2,
            target: 2.0,
            tolerance: 0.15,
            refinement: true,
            refinement_tolerance: 0.05,
            context_dims: vec![3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub nu: f64,
    pub dim: usize,
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub record_stride: usize,
    /// Covariance is estimated on all pairs of these times.
    pub times: Vec<f64>,
    /// `t₂` of the one-sided slopes.
    pub slope_time: f64,
    pub max_z: f64,
    pub fractal: Option<FractalParams>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            nu: 0.5,
            dim: 1,
            paths: 100_000,
            dt: 0.01,
            horizon: 1.0,
            record_stride: 5,
            times: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            slope_time: 0.5,
            max_z: 4.0,
            fractal: Some(FractalParams::default()),
        }
    }
}

fn covariance_part(p: &Params, run: &mut Run) -> Result<serde_json::Value> {
    let model = MarkovModel::brownian(p.nu, p.dim)?;
    let options = SimulationOptions::new(p.horizon, p.dt, p.paths, stream_seed(run.seed, 0)).with_record_stride(p.record_stride);
    let ens = simulate(&model, &InitialCondition::Point(vec![0.0; p.dim]), &options)?;
    let grid = covariance_grid(&ens, &p.times)?;
    run.write_with("covariance.csv", |w| write_covariance_csv(&grid, w))?;

    let worst = grid
        .iter()
        .map(|e| (e.z_score(2.0 * p.nu * e.t1.min(e.t2)), e))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((z, e)) = worst {
        run.check(
            Check::below("covariance against 2 nu min(t1, t2) (max z over the grid)", z, p.max_z)
                .with_detail(format!("worst at ({}, {}), {} entries", e.t1, e.t2, grid.len())),
        );
    }

    // Positive semi-definiteness of the estimated covariance matrix.
    let n = p.times.len();
    let m = DMatrix::from_fn(n, n, |i, j| grid[i * n + j].estimate);
    let smallest = m.clone().symmetric_eigenvalues().min();
    let (largest_entry, largest_stderr) = grid
        .iter()
        .map(|e| (e.estimate.abs(), e.stderr))
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    run.check(
        Check::above("smallest covariance eigenvalue", smallest, -p.max_z * largest_stderr)
            .with_detail(format!("largest entry {largest_entry:.4e}")),
    );

    let slopes = one_sided_derivative(&ens, p.slope_time)?;
    run.check(Check::z_score("left slope equals 2 nu", slopes.left.mean, slopes.left.stderr, 2.0 * p.nu, p.max_z));
    run.check(Check::z_score("right slope vanishes", slopes.right.mean, slopes.right.stderr, 0.0, p.max_z));
    Ok(json!({ "paths": ens.paths(), "smallest_eigenvalue": smallest, "slopes": slopes }))
}

fn fractal_part(f: &FractalParams, run: &mut Run) -> Result<serde_json::Value> {
    let mut traces = Vec::new();
    let mut dims = vec![f.dim];
    dims.extend(f.context_dims.iter().copied().filter(|&d| d != f.dim));
    for (i, &dim) in dims.iter().enumerate() {
        let path = brownian_path(dim, f.nu, f.dt, f.steps, stream_seed(run.seed, 100 + dim as u64))?;
        let est = fractal_dimension(&path, dim)?;
        run.progress(&format!("{dim}D box-counting dimension {:.4}", est.dimension));
        let mut entry = json!({ "dim": dim, "steps": f.steps, "estimate": est });
        if i == 0 {
            run.check(
                Check::absolute(format!("{dim}D box-counting dimension"), est.dimension, f.target, f.tolerance).with_detail(
                    format!("fit over {:.2} decades, slope stderr {:.2e}", est.fit_decades, est.slope_stderr),
                ),
            );
            if f.refinement {
                let fine = refine_path(&path, dim, f.nu, f.dt, stream_seed(run.seed, 200 + dim as u64))?;
                drop(path);
                let refined = fractal_dimension(&fine, dim)?;
                run.check(Check::absolute(
                    format!("{dim}D dimension under step halving"),
                    refined.dimension,
                    est.dimension,
                    f.refinement_tolerance,
                ));
                entry["refined"] = serde_json::to_value(&refined)?;
            }
        }
        traces.push(entry);
    }
    Ok(json!(traces))
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    let covariance = covariance_part(p, run)?;
    run.write_json("covariance_summary.json", &covariance)?;
    if let Some(f) = &p.fractal {
        let traces = fractal_part(f, run)?;
        run.write_json("dimension.json", &traces)?;
    }
    Ok(())
}
