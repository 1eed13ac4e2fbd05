use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sqm_core::markov::{force_expectation_kernel, force_expectation_mc, McForceOptions};
use sqm_core::rng::stream_seed;
use sqm_core::Boundary;

use super::Run;
use crate::manifest::Check;
use crate::setup::{LineSpec, ModelSpec, PotentialSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub model: ModelSpec,
    pub potential: PotentialSpec,
    pub line: LineSpec,
    pub tau: f64,
    /// Evaluation points of the kernel route.
    pub points: Vec<f64>,
    pub kernel: bool,
    /// Evaluation points of the Monte Carlo route.
    pub mc_points: Vec<f64>,
    pub mc_paths: usize,
    pub mc_dt: Option<f64>,
    /// Relative tolerance of the kernel route against the closed form.
    pub kernel_tolerance: f64,
    pub max_z: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            model: ModelSpec::OrnsteinUhlenbeck { rate: 0.8, nu: 0.5 },
            potential: PotentialSpec::Harmonic { m_omega2: 1.3 },
            line: LineSpec {
                half_extent: 8.0,
                nodes: 321,
            },
            tau: 0.7,
            points: vec![-1.5, 0.7, 2.0],
            kernel: true,
            mc_points: vec![1.2],
            mc_paths: 100_000,
            mc_dt: None,
            kernel_tolerance: 0.01,
            max_z: 4.0,
        }
    }
}

impl Params {
    /// `−(k x/(1 + γτ) + s)` for `V' = k x + s` under a process whose mean
    /// relaxes as `x e^{−γt}`.
    pub fn closed_form(&self, x: f64) -> Option<f64> {
        let (k, s) = self.potential.affine_gradient()?;
        Some(-(k * x / (1.0 + self.model.rate() * self.tau) + s))
    }
}

/// Runs both routes, records the closed-form checks under `label` and
/// returns the per-point results.
pub fn evaluate(p: &Params, run: &mut Run, label: &str) -> Result<Value> {
    if !p.kernel && (p.mc_paths == 0 || p.mc_points.is_empty()) {
        bail!("both routes are disabled");
    }
    let grid = p.line.grid()?;
    let v = p.potential.field(&grid, Boundary::Dirichlet)?;
    let model = p.model.model(1)?;
    if p.closed_form(0.0).is_none() {
        run.note(format!("{label}no closed form for this potential; results are reported without checks"));
    }

    let mut kernel_rows = Vec::new();
    if p.kernel {
        for &x in &p.points {
            let k = force_expectation_kernel(&model, &v, p.tau, &[x])?;
            let exact = p.closed_form(x);
            if let Some(e) = exact {
                run.check(Check::relative(format!("{label}kernel route at x = {x}"), k.force[0], e, p.kernel_tolerance));
            }
            kernel_rows.push(json!({ "x": x, "closed_form": exact, "kernel": k }));
        }
    }

    let mut mc_rows = Vec::new();
    if p.mc_paths > 0 {
        for (i, &x) in p.mc_points.iter().enumerate() {
            let options = McForceOptions {
                dt: p.mc_dt,
                ..McForceOptions::new(p.mc_paths, stream_seed(run.seed, i as u64))
            };
            let mc = force_expectation_mc(&model, &v, p.tau, &[x], &options)?;
            let exact = p.closed_form(x);
            if let Some(e) = exact {
                let c = &mc.components[0];
                run.check(
                    Check::z_score(format!("{label}Monte Carlo route at x = {x}"), c.mean, c.stderr, e, p.max_z)
                        .with_detail(format!("{} paths, {} discarded", c.samples, mc.discarded)),
                );
            }
            for w in &mc.warnings {
                run.note(format!("{label}{w}"));
            }
            mc_rows.push(json!({ "x": x, "closed_form": exact, "monte_carlo": mc }));
        }
    }
    Ok(json!({ "tau": p.tau, "kernel": kernel_rows, "monte_carlo": mc_rows }))
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    let report = evaluate(p, run, "")?;
    run.write_json("force.json", &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_covers_affine_gradients_only() {
        let p = Params::default();
        let e = p.closed_form(1.0).unwrap();
        assert!((e + 1.3 / (1.0 + 0.8 * 0.7)).abs() < 1e-15);
        let b = Params {
            model: ModelSpec::Brownian { nu: 1.0 },
            potential: PotentialSpec::Linear { slope: 0.4 },
            ..Params::default()
        };
        assert_eq!(b.closed_form(3.0), Some(-0.4));
        let dw = Params {
            potential: PotentialSpec::DoubleWell { a: 1.0, b: 1.0 },
            ..Params::default()
        };
        assert!(dw.closed_form(1.0).is_none());
    }
}
