use serde::{Deserialize, Serialize};

use super::force::{force_expectation_kernel, force_expectation_mc, McForce, McForceOptions};
use super::stationary_drift;
use crate::error::{invalid, Result};
use crate::logse::{thermal_force, LogSEProblem, LogSESolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureOptions {
    /// Evaluation points; `None` picks five points along the first axis,
    /// offset from the mean by multiples of the width.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_true")]
    pub kernel: bool,
    /// Monte Carlo paths per point; 0 skips the route.
    #[serde(default)]
    pub mc_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mc_dt: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions {
            points: None,
            kernel: true,
            mc_paths: 0,
            seed: 0,
            mc_dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosurePoint {
    pub x: Vec<f64>,
    /// `kT ∇ln ρ` at `x`.
    pub target: Vec<f64>,
    pub kernel: Option<Vec<f64>>,
    /// Largest component deviation of the kernel route, relative to the force scale.
    pub kernel_deviation: Option<f64>,
    pub mc: Option<McForce>,
    pub mc_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub nu: f64,
    pub tau: f64,
    /// `|D − 2τνkT| / D`; a nonzero value means the solution was not built
    /// for this (ν, τ) pair.
    pub diffusion_mismatch: f64,
    /// Largest `|kT ∇ln ρ|` over the evaluation points.
    pub force_scale: f64,
    pub points: Vec<ClosurePoint>,
    pub max_kernel_deviation: Option<f64>,
    pub max_mc_z: Option<f64>,
    pub warnings: Vec<String>,
}

/// Compares the thermal force `kT ∇ln ρ` of a log-Schrödinger solution with
/// the force expectation of the stationary process `b = ν ∇ln ρ`.
pub fn gibbs_closure(
    sol: &LogSESolution,
    problem: &LogSEProblem,
    nu: f64,
    tau: f64,
    options: &ClosureOptions,
) -> Result<ClosureReport> {
    if !(nu >= 0.0 && nu.is_finite() && tau >= 0.0 && tau.is_finite()) {
        return invalid("ν and τ must be finite and >= 0");
    }
    let kt = problem.thermal_energy;
    let d = problem.grid().dim();
    let density = &sol.density;
    let model = stationary_drift(density, nu)?;
    let thermal = thermal_force(density, kt)?;
    let predicted = 2.0 * tau * nu * kt;
    let diffusion_mismatch = if problem.diffusion > 0.0 {
        (problem.diffusion - predicted).abs() / problem.diffusion
    } else if predicted == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let mut warnings = Vec::new();
    if diffusion_mismatch > 1e-9 {
        warnings.push(format!(
            "D = {} differs from 2τνkT = {predicted} (relative {diffusion_mismatch:.3e})",
            problem.diffusion
        ));
    }
    let points = match &options.points {
        Some(p) => p.clone(),
        None => {
            let mut centre = vec![0.0; d];
            let w = density.grid().weights(density.boundary());
            let mass: f64 = density.values().iter().zip(&w).map(|(r, w)| r * w).sum();
            for (i, (r, w)) in density.values().iter().zip(&w).enumerate() {
                let c = density.grid().coords(i);
                for k in 0..d {
                    centre[k] += r * w * c[k] / mass;
                }
            }
            let s = sol.width(0);
            [-1.5, -0.75, 0.5, 1.0, 1.75]
                .iter()
                .map(|f| {
                    let mut x = centre.clone();
                    x[0] += f * s;
                    x
                })
                .collect()
        }
    };
    if points.iter().any(|p| p.len() != d) {
        return invalid("evaluation points must match the grid dimension");
    }
    let mc_options = McForceOptions {
        paths: options.mc_paths,
        seed: options.seed,
        dt: options.mc_dt,
    };
    if options.mc_paths > 0 && tau == 0.0 {
        warnings.push("Monte Carlo route skipped at τ = 0".into());
    }
    let mut out = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate() {
        let target = thermal
            .sample(x)
            .ok_or_else(|| crate::Error::InvalidInput(format!("point {x:?} lies outside the grid")))?[..d]
            .to_vec();
        let kernel = if options.kernel {
            Some(force_expectation_kernel(&model, &problem.potential, tau, x)?.force)
        } else {
            None
        };
        let mc = if options.mc_paths > 0 && tau > 0.0 {
            let opts = McForceOptions {
                seed: crate::rng::stream_seed(options.seed, i as u64),
                ..mc_options.clone()
            };
            let r = force_expectation_mc(&model, &problem.potential, tau, x, &opts)?;
            warnings.extend(r.warnings.iter().map(|w| format!("point {i}: {w}")));
            Some(r)
        } else {
            None
        };
        let mc_z = mc.as_ref().map(|m| m.max_z(&target));
        out.push(ClosurePoint {
            x: x.clone(),
            target,
            kernel,
            kernel_deviation: None,
            mc,
            mc_z,
        });
    }
    let force_scale = out
        .iter()
        .map(|p| p.target.iter().map(|t| t * t).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    for p in &mut out {
        if let Some(k) = &p.kernel {
            let dev = k.iter().zip(&p.target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            p.kernel_deviation = Some(if force_scale > 0.0 { dev / force_scale } else { dev });
        }
    }
    let max_opt = |it: Vec<Option<f64>>| it.into_iter().flatten().reduce(f64::max);
    Ok(ClosureReport {
        nu,
        tau,
        diffusion_mismatch,
        force_scale,
        max_kernel_deviation: max_opt(out.iter().map(|p| p.kernel_deviation).collect()),
        max_mc_z: max_opt(out.iter().map(|p| p.mc_z).collect()),
        points: out,
        warnings,
    })
}
