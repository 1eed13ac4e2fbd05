use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sqm_core::logse::{solve, LogSEProblem};
use sqm_core::markov::{gibbs_closure, ClosureOptions};
use sqm_core::Boundary;

use super::{force_expectation, Run};
use crate::manifest::Check;
use crate::setup::{LineSpec, PotentialSpec};

/// Closure of the thermal force on a harmonic log-Schrödinger ground state,
/// with `D = 2τνkT`, plus the Ornstein–Uhlenbeck closed-form comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub line: LineSpec,
    pub m_omega2: f64,
    pub nu: f64,
    pub tau: f64,
    pub kt: f64,
    pub points: Option<Vec<f64>>,
    pub mc_paths: usize,
    pub mc_dt: Option<f64>,
    pub tolerance: f64,
    pub max_z: f64,
    pub ou: Option<force_expectation::Params>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            line: LineSpec {
                half_extent: 8.0,
                nodes: 321,
            },
            m_omega2: 1.0,
            nu: 0.5,
            tau: 1.0,
            kt: 0.5,
            points: None,
            mc_paths: 0,
            mc_dt: None,
            tolerance: 0.02,
            max_z: 4.0,
            ou: Some(force_expectation::Params::default()),
        }
    }
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    let grid = p.line.grid()?;
    let v = PotentialSpec::Harmonic { m_omega2: p.m_omega2 }.field(&grid, Boundary::Dirichlet)?;
    let diffusion = 2.0 * p.tau * p.nu * p.kt;
    let problem = LogSEProblem::new(v, diffusion, p.kt)?;
    let sol = solve(&problem)?;
    let options = ClosureOptions {
        points: p.points.as_ref().map(|xs| xs.iter().map(|&x| vec![x]).collect()),
        kernel: true,
        mc_paths: p.mc_paths,
        seed: run.seed,
        mc_dt: p.mc_dt,
    };
    let report = gibbs_closure(&sol, &problem, p.nu, p.tau, &options)?;
    for w in &report.warnings {
        run.note(w.clone());
    }
    if let Some(dev) = report.max_kernel_deviation {
        run.check(Check::below("kernel route against kT grad ln rho", dev, p.tolerance));
    }
    if let Some(z) = report.max_mc_z {
        run.check(Check::below("Monte Carlo route against kT grad ln rho (max z)", z, p.max_z));
    }
    let ou = match &p.ou {
        Some(ou) => Some(force_expectation::evaluate(ou, run, "OU closed form: ")?),
        None => None,
    };
    run.write_json(
        "closure.json",
        &json!({
            "diffusion": diffusion,
            "solution": sol.summary(&problem),
            "closure": report,
            "ou": ou,
        }),
    )
}
