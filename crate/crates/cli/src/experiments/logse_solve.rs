use anyhow::{bail, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sqm_core::fields::write_csv;
use sqm_core::logse::{gausson_width, gibbs_limit, solve, LogSEProblem, LogSESolution, SolutionSummary};
use sqm_core::{Boundary, Grid, ScalarField};

use super::Run;
use crate::manifest::Check;
use crate::setup::{LineSpec, PotentialSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub line: LineSpec,
    pub potential: PotentialSpec,
    pub diffusion: f64,
    pub kt: f64,
    pub tolerance: f64,
    pub damping: f64,
    pub max_iterations: usize,
    /// Also solve at kT = 0 and compare with a dense eigensolver.
    pub linear_limit: bool,
    /// Also solve at `boltzmann_diffusion` and compare with `e^{-V/kT}`.
    pub boltzmann_limit: bool,
    pub boltzmann_diffusion: f64,
    pub width_tolerance: f64,
    pub linear_tolerance: f64,
    pub boltzmann_tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            line: LineSpec {
                half_extent: 10.0,
                nodes: 1024,
            },
            potential: PotentialSpec::Harmonic { m_omega2: 1.0 },
            diffusion: 0.5,
            kt: 0.5,
            tolerance: 1e-10,
            damping: 0.5,
            max_iterations: 20_000,
            linear_limit: true,
            boltzmann_limit: true,
            boltzmann_diffusion: 1e-6,
            width_tolerance: 1e-4,
            linear_tolerance: 1e-4,
            boltzmann_tolerance: 1e-3,
        }
    }
}

impl Params {
    fn problem(&self, v: &ScalarField, diffusion: f64, kt: f64) -> Result<LogSEProblem> {
        Ok(LogSEProblem::new(v.clone(), diffusion, kt)?
            .with_tolerance(self.tolerance)
            .with_damping(self.damping)
            .with_max_iterations(self.max_iterations))
    }
}

/// Lowest eigenpair of `−D Δ + V` with the three-point Laplacian and zero
/// ghost nodes, from a dense symmetric eigendecomposition. The vector is
/// normalised with `weights` and made positive.
pub fn dense_ground_state(v: &[f64], h: f64, diffusion: f64, weights: &[f64]) -> (f64, Vec<f64>) {
    let n = v.len();
    let off = -diffusion / (h * h);
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            v[i] - 2.0 * off
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(m);
    let k = eig.eigenvalues.imin();
    let mut f: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let sign = if f.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let norm = f.iter().zip(weights).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
    f.iter_mut().for_each(|x| *x *= sign / norm);
    (eig.eigenvalues[k], f)
}

fn l2_distance(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| w * (x - y).powi(2)).sum::<f64>().sqrt()
}

fn l1_distance(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| w * (x - y).abs()).sum()
}

#[derive(Serialize)]
struct Limit {
    summary: SolutionSummary,
    reference_eigenvalue: Option<f64>,
    distance: f64,
    norm: &'static str,
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    let grid: Grid = p.line.grid()?;
    let bc = Boundary::Dirichlet;
    let v = p.potential.field(&grid, bc)?;
    let weights = grid.weights(bc);

    let problem = p.problem(&v, p.diffusion, p.kt)?;
    let sol: LogSESolution = solve(&problem)?;
    run.progress(&format!("solved in {} sweeps, residual {:.2e}", sol.iterations, sol.residual));
    let width = sol.width(0);
    let mut extra = serde_json::Map::new();
    extra.insert("lambda".into(), json!(sol.eigenvalue));
    extra.insert("kT".into(), json!(p.kt));
    extra.insert("D".into(), json!(p.diffusion));
    run.write_with("density.csv", |w| write_csv(&sol.density, None, extra, w))?;

    let mut report = json!({
        "summary": sol.summary(&problem),
        "width": width,
    });

    if let PotentialSpec::Harmonic { m_omega2 } = p.potential {
        if p.diffusion > 0.0 {
            let expected = gausson_width(m_omega2, p.diffusion, p.kt)?;
            report["gausson_width"] = json!(expected);
            run.check(Check::relative("Gausson width", width, expected, p.width_tolerance));
        }
    } else {
        run.note("the Gausson width check applies to harmonic potentials only");
    }

    if p.linear_limit {
        if p.diffusion <= 0.0 {
            bail!("the linear limit needs D > 0");
        }
        let lp = p.problem(&v, p.diffusion, 0.0)?;
        let linear = solve(&lp)?;
        let f = linear.amplitude();
        let (lambda, g) = dense_ground_state(v.values(), grid.spacing(0), p.diffusion, &weights);
        let dist = l2_distance(f.values(), &g, &weights);
        report["linear_limit"] = serde_json::to_value(Limit {
            summary: linear.summary(&lp),
            reference_eigenvalue: Some(lambda),
            distance: dist,
            norm: "L2 of the amplitude",
        })?;
        run.check(Check::below("kT -> 0 against the dense eigensolver (L2)", dist, p.linear_tolerance));
    }

    if p.boltzmann_limit {
        if p.kt <= 0.0 {
            bail!("the Boltzmann limit needs kT > 0");
        }
        let bp = p.problem(&v, p.boltzmann_diffusion, p.kt)?;
        let hot = solve(&bp)?;
        let gibbs = gibbs_limit(&v, p.kt)?;
        let dist = l1_distance(hot.density.values(), gibbs.values(), &weights);
        report["boltzmann_limit"] = serde_json::to_value(Limit {
            summary: hot.summary(&bp),
            reference_eigenvalue: None,
            distance: dist,
            norm: "L1 of the density",
        })?;
        run.check(Check::below("D -> 0 against the Boltzmann density (L1)", dist, p.boltzmann_tolerance));
    }

    run.write_json("solution.json", &report)?;
    Ok(())
}
