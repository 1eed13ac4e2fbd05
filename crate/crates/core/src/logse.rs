//! Ground states of the logarithmic Schrödinger eigenproblem
//!
//! ```text
//! [-D Δ + V + 2 kT R] e^R = λ e^R,   R = ln(ρ)/2,   D = 2 τ ν kT
//! ```
//!
//! Each sweep freezes the density in the logarithm and takes one shifted
//! inverse-iteration step on the resulting linear operator. The shift sits
//! `kT / damping` below the minimum of the frozen effective potential, which
//! makes the sweep a semi-implicit imaginary-time step of length
//! `damping / kT`. At `kT = 0` it is plain inverse iteration. Densities are
//! normalised to `∫ρ = 1` and λ refers to that normalisation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{gradient, integrate, laplacian, laplacian_into, Boundary, Grid, ScalarField, VectorField};
use crate::linalg::{conjugate_gradient, solve_cyclic_tridiagonal, solve_tridiagonal};

/// Floor applied to densities before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct LogSEProblem {
    pub potential: ScalarField,
    /// `D = 2 τ ν kT` (erg cm²).
    pub diffusion: f64,
    /// `kT` (erg).
    pub thermal_energy: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
}

impl LogSEProblem {
    pub fn new(potential: ScalarField, diffusion: f64, thermal_energy: f64) -> Result<Self> {
        let p = LogSEProblem {
            potential,
            diffusion,
            thermal_energy,
            tolerance: 1e-10,
            max_iterations: 20_000,
            damping: 0.5,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.potential.grid()
    }

    pub fn boundary(&self) -> Boundary {
        self.potential.boundary()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return invalid("D must be positive and finite");
        }
        if !(self.thermal_energy >= 0.0 && self.thermal_energy.is_finite()) {
            return invalid("kT must be finite and >= 0");
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return invalid("tolerance must be > 0 and max_iterations >= 1");
        }
        if !(self.damping > 0.0 && self.damping.is_finite()) {
            return invalid("damping must be positive");
        }
        if self.boundary() == Boundary::Open {
            return invalid("the eigenproblem needs Dirichlet or periodic boundaries, not open");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogSESolution {
    /// `R = ln(ρ)/2`.
    pub log_density: ScalarField,
    pub density: ScalarField,
    /// λ for the normalisation `∫ρ = 1` (erg).
    pub eigenvalue: f64,
    pub iterations: usize,
    /// Relative residual of the final iterate (see [`relative_residual`]).
    pub residual: f64,
}

/// Machine-readable summary written next to the solution field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    #[serde(rename = "kT")]
    pub kt: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl LogSESolution {
    /// `√ρ = e^R`.
    pub fn amplitude(&self) -> ScalarField {
        self.log_density.map(f64::exp)
    }

    pub fn summary(&self, problem: &LogSEProblem) -> SolutionSummary {
        SolutionSummary {
            lambda: self.eigenvalue,
            residual: self.residual,
            iterations: self.iterations,
            kt: problem.thermal_energy,
            d: problem.diffusion,
        }
    }

    /// Root-mean-square width along `axis` under ρ.
    pub fn width(&self, axis: usize) -> f64 {
        let g = self.density.grid();
        let w = g.weights(self.density.boundary());
        let rho = self.density.values();
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..g.len() {
            let x = g.coords(i)[axis];
            let p = rho[i] * w[i];
            m0 += p;
            m1 += p * x;
            m2 += p * x * x;
        }
        let mean = m1 / m0;
        (m2 / m0 - mean * mean).sqrt()
    }
}

fn weighted_norm_sqr(f: &[f64], w: &[f64]) -> f64 {
    f.iter().zip(w).map(|(a, b)| a * a * b).sum()
}

fn effective_potential(problem: &LogSEProblem, f: &[f64]) -> Vec<f64> {
    let kt = problem.thermal_energy;
    problem
        .potential
        .values()
        .iter()
        .zip(f)
        .map(|(&v, &fi)| if kt > 0.0 { v + kt * (fi * fi).max(DENSITY_FLOOR).ln() } else { v })
        .collect()
}

/// `(H[f] f, λ)` with `H[f] = -DΔ + V + kT ln f²` and λ the Rayleigh quotient
/// (plain sums, matching the symmetric matrix form of H).
fn apply_nonlinear(problem: &LogSEProblem, f: &[f64]) -> (Vec<f64>, f64) {
    let grid = problem.grid();
    let veff = effective_potential(problem, f);
    let mut lap = vec![0.0; f.len()];
    laplacian_into(grid, problem.boundary(), f, &mut lap);
    let hf: Vec<f64> = (0..f.len()).map(|i| -problem.diffusion * lap[i] + veff[i] * f[i]).collect();
    let num: f64 = hf.iter().zip(f).map(|(a, b)| a * b).sum();
    let den: f64 = f.iter().map(|a| a * a).sum();
    (hf, num / den)
}

/// Energy scale against which residuals are measured:
/// `kT + max(‖DΔf‖/‖f‖, D(π/L)²) + sd_ρ(V)`.
fn energy_scale(problem: &LogSEProblem, f: &[f64]) -> f64 {
    let grid = problem.grid();
    let mut lap = vec![0.0; f.len()];
    laplacian_into(grid, problem.boundary(), f, &mut lap);
    let fn2: f64 = f.iter().map(|a| a * a).sum();
    let kin = problem.diffusion * (lap.iter().map(|a| a * a).sum::<f64>() / fn2).sqrt();
    // The box's lowest kinetic scale keeps the reference finite when f is flat.
    let length = grid.axes().iter().map(|a| a.max - a.min).fold(0.0, f64::max);
    let kin = kin.max(problem.diffusion * (std::f64::consts::PI / length).powi(2));
    let v = problem.potential.values();
    let w: f64 = f.iter().map(|a| a * a).sum();
    let mean: f64 = v.iter().zip(f).map(|(vi, fi)| vi * fi * fi).sum::<f64>() / w;
    let var: f64 = v.iter().zip(f).map(|(vi, fi)| (vi - mean).powi(2) * fi * fi).sum::<f64>() / w;
    problem.thermal_energy + kin + var.sqrt()
}

/// `‖(H[f] - λ)f‖ / ‖f‖` divided by the problem's energy scale.
pub fn relative_residual(problem: &LogSEProblem, amplitude: &[f64]) -> f64 {
    let (hf, lambda) = apply_nonlinear(problem, amplitude);
    let num: f64 = hf
        .iter()
        .zip(amplitude)
        .map(|(h, f)| (h - lambda * f).powi(2))
        .sum::<f64>()
        .sqrt();
    if num == 0.0 {
        return 0.0;
    }
    let fnorm: f64 = amplitude.iter().map(|a| a * a).sum::<f64>().sqrt();
    num / fnorm / energy_scale(problem, amplitude)
}

/// λ for an arbitrary (not necessarily normalised) positive density.
pub fn rayleigh_quotient(problem: &LogSEProblem, density: &ScalarField) -> Result<f64> {
    if density.values().iter().any(|&r| r <= 0.0) {
        return invalid("density must be positive everywhere");
    }
    let f: Vec<f64> = density.values().iter().map(|r| r.sqrt()).collect();
    Ok(apply_nonlinear(problem, &f).1)
}

/// Solve `(-DΔ + diag(shifted)) g = f`.
fn shifted_solve(problem: &LogSEProblem, shifted: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let grid = problem.grid();
    let d = problem.diffusion;
    if grid.dim() == 1 {
        let n = f.len();
        let h = grid.spacing(0);
        let off = -d / (h * h);
        let lower = vec![off; n];
        let upper = vec![off; n];
        let diag: Vec<f64> = shifted.iter().map(|s| 2.0 * d / (h * h) + s).collect();
        return match problem.boundary() {
            Boundary::Periodic => solve_cyclic_tridiagonal(&lower, &diag, &upper, f),
            _ => solve_tridiagonal(&lower, &diag, &upper, f),
        };
    }
    let bc = problem.boundary();
    let apply = |x: &[f64], y: &mut [f64]| {
        laplacian_into(grid, bc, x, y);
        for i in 0..x.len() {
            y[i] = -d * y[i] + shifted[i] * x[i];
        }
    };
    let (g, _) = conjugate_gradient(apply, f, Some(f), 1e-14, 20 * f.len().max(100))?;
    Ok(g)
}

/// Normalised `e^{-V/kT}`, shifted by `min V` before exponentiating.
pub fn gibbs_limit(potential: &ScalarField, kt: f64) -> Result<ScalarField> {
    if !(kt > 0.0 && kt.is_finite()) {
        return invalid("Gibbs density needs kT > 0");
    }
    let vmin = potential.min_value();
    let rho = potential.map(|v| (-(v - vmin) / kt).exp());
    let z = integrate(&rho);
    Ok(rho.scale(1.0 / z))
}

fn normalise(f: &mut [f64], weights: &[f64]) {
    let s = weighted_norm_sqr(f, weights).sqrt();
    f.iter_mut().for_each(|v| *v /= s);
}

fn initial_amplitude(problem: &LogSEProblem) -> Result<Vec<f64>> {
    let grid = problem.grid();
    let kt = problem.thermal_energy;
    let v = &problem.potential;
    // A Gibbs start at a temperature no lower than the potential's own energy
    // spread keeps the first sweeps from collapsing onto a single node.
    let spread = (v.max_value() - v.min_value()).max(0.0);
    let t_start = kt.max(1e-3 * spread);
    let mut f: Vec<f64> = if t_start > 0.0 {
        gibbs_limit(v, t_start)?.values().iter().map(|r| r.sqrt()).collect()
    } else {
        vec![1.0; grid.len()]
    };
    normalise(&mut f, &grid.weights(problem.boundary()));
    Ok(f)
}

/// Ground state of the logarithmic problem.
///
/// Errors with [`Error::Convergence`] when the iteration budget runs out and
/// with [`Error::Diagnostic`] when the residual grows without bound, which is
/// what happens when the log term dominates and the damping is too weak.
pub fn solve(problem: &LogSEProblem) -> Result<LogSESolution> {
    problem.validate()?;
    let grid = problem.grid().clone();
    let bc = problem.boundary();
    let weights = grid.weights(bc);
    let kt = problem.thermal_energy;

    // Small extra shift so the periodic, V = const, kT = 0 case stays invertible.
    let length = grid.axes().iter().map(|a| a.max - a.min).fold(0.0, f64::max);
    let xi = 0.05 * problem.diffusion * (std::f64::consts::PI / length).powi(2);

    let mut f = initial_amplitude(problem)?;
    let mut monitor = ResidualMonitor::default();
    let mut residual = relative_residual(problem, &f);
    for iteration in 1..=problem.max_iterations {
        let veff = effective_potential(problem, &f);
        let vmin = veff.iter().copied().fold(f64::INFINITY, f64::min);
        let shift = vmin - kt / problem.damping - xi;
        let shifted: Vec<f64> = veff.iter().map(|v| v - shift).collect();
        let mut g = shifted_solve(problem, &shifted, &f)?;
        // Inverse of an M-matrix: the iterate stays non-negative; clear roundoff.
        g.iter_mut().for_each(|v| *v = v.abs());
        normalise(&mut g, &weights);
        f = g;
        residual = relative_residual(problem, &f);
        monitor.observe(residual).map_err(|msg| {
            Error::Diagnostic(format!(
                "{msg} by sweep {iteration}; the kT ln(rho) term overwhelms V at damping {}",
                problem.damping
            ))
        })?;
        if residual <= problem.tolerance {
            return Ok(finish(problem, f, iteration, residual));
        }
    }
    Err(Error::Convergence {
        what: "log-Schrödinger sweep",
        iterations: problem.max_iterations,
        residual,
    })
}

/// Watches the residual sequence for blow-up or sustained oscillation.
#[derive(Debug, Default)]
pub struct ResidualMonitor {
    history: Vec<f64>,
    best: f64,
    best_at: usize,
}

impl ResidualMonitor {
    const WINDOW: usize = 40;

    pub fn observe(&mut self, r: f64) -> std::result::Result<(), String> {
        let n = self.history.len();
        if n == 0 || r < self.best {
            self.best = r;
            self.best_at = n;
        }
        self.history.push(r);
        if !r.is_finite() {
            return Err("residual became non-finite".into());
        }
        if n >= 5 && r > 1e3 * self.best {
            return Err(format!("residual grew from {:.3e} to {r:.3e}", self.best));
        }
        let n = self.history.len();
        if n > Self::WINDOW && n - 1 - self.best_at >= Self::WINDOW {
            let tail = &self.history[n - Self::WINDOW..];
            let flips = tail
                .windows(3)
                .filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0)
                .count();
            if flips >= Self::WINDOW * 3 / 4 {
                return Err(format!(
                    "residual oscillates without improving on {:.3e} for {} sweeps",
                    self.best,
                    Self::WINDOW
                ));
            }
        }
        Ok(())
    }
}

fn finish(problem: &LogSEProblem, f: Vec<f64>, iterations: usize, residual: f64) -> LogSESolution {
    let grid = problem.grid().clone();
    let bc = problem.boundary();
    let (_, eigenvalue) = apply_nonlinear(problem, &f);
    let rho: Vec<f64> = f.iter().map(|a| (a * a).max(DENSITY_FLOOR)).collect();
    let r: Vec<f64> = rho.iter().map(|p| 0.5 * p.ln()).collect();
    LogSESolution {
        log_density: ScalarField::from_parts(grid.clone(), bc, r),
        density: ScalarField::from_parts(grid, bc, rho),
        eigenvalue,
        iterations,
        residual,
    }
}

/// `V - D (Δ√ρ)/√ρ`, the potential whose Gibbs density ρ must be.
fn dressed_potential(density: &ScalarField, problem: &LogSEProblem) -> Result<ScalarField> {
    if density.grid() != problem.grid() {
        return invalid("density and potential live on different grids");
    }
    if let Some(i) = density.values().iter().position(|&r| r <= 0.0) {
        return invalid(format!("density is not positive at node {i}"));
    }
    let sqrt = density.map(f64::sqrt).with_boundary(problem.boundary());
    let lap = laplacian(&sqrt);
    let q = problem
        .potential
        .values()
        .iter()
        .zip(lap.values().iter().zip(sqrt.values()))
        .map(|(v, (l, s))| v - problem.diffusion * l / s)
        .collect();
    Ok(ScalarField::from_parts(problem.grid().clone(), problem.boundary(), q))
}

/// Max-norm distance between ρ and `exp[-(V - DΔ√ρ/√ρ - c₀)/kT]`, with `c₀`
/// fixed by normalisation.
pub fn fixed_point_residual(density: &ScalarField, problem: &LogSEProblem) -> Result<f64> {
    if problem.thermal_energy <= 0.0 {
        return invalid("the fixed-point form needs kT > 0");
    }
    let q = dressed_potential(density, problem)?;
    let candidate = gibbs_limit(&q, problem.thermal_energy)?;
    // Compare at the density's own normalisation.
    let mass = integrate(density);
    Ok(density
        .values()
        .iter()
        .zip(candidate.values())
        .map(|(r, c)| (r - mass * c).abs())
        .fold(0.0, f64::max))
}

/// Nodes whose density is below this fraction of the peak are treated as
/// outside the support when comparing forces node by node: there the
/// pointwise residual divided by `√ρ` is not controlled by the L² tolerance.
pub const SUPPORT_FRACTION: f64 = 1e-12;

/// `-∇[V - D(Δ√ρ)/√ρ]`, differenced with one-sided stencils at the edges.
pub fn effective_force(density: &ScalarField, problem: &LogSEProblem) -> Result<VectorField> {
    let q = dressed_potential(density, problem)?.with_boundary(Boundary::Open);
    Ok(gradient(&q).scale(-1.0))
}

/// `kT ∇ln ρ` with the same stencils as [`effective_force`].
pub fn thermal_force(density: &ScalarField, kt: f64) -> Result<VectorField> {
    if let Some(i) = density.values().iter().position(|&r| r <= 0.0) {
        return invalid(format!("density is not positive at node {i}"));
    }
    let ln = density.map(|r| r.ln()).with_boundary(Boundary::Open);
    Ok(gradient(&ln).scale(kt))
}

/// Positive root σ of `kT/(2σ²) = ½mω² − D/(4σ⁴)`, the width of the Gaussian
/// solution in a harmonic well `½mω²x²`.
pub fn gausson_width(m_omega2: f64, diffusion: f64, kt: f64) -> Result<f64> {
    if !(m_omega2 > 0.0 && diffusion > 0.0 && kt >= 0.0) {
        return invalid("gausson width needs m ω² > 0, D > 0, kT >= 0");
    }
    // In u = 1/σ²: D u²/4 + kT u/2 − mω²/2 = 0.
    let (a, b, c) = (diffusion / 4.0, kt / 2.0, -m_omega2 / 2.0);
    let u = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
    Ok(1.0 / u.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Axis;

    fn harmonic(n: usize, half: f64, m_omega2: f64) -> ScalarField {
        let g = Grid::new(vec![Axis::new(-half, half, n)]).unwrap();
        ScalarField::from_fn(g, Boundary::Dirichlet, |x| 0.5 * m_omega2 * x[0] * x[0]).unwrap()
    }

    #[test]
    fn gausson_width_root_solves_equation() {
        let s = gausson_width(1.0, 0.5, 0.5).unwrap();
        let lhs = 0.5 / (2.0 * s * s);
        let rhs = 0.5 - 0.5 / (4.0 * s.powi(4));
        assert!((lhs - rhs).abs() < 1e-14);
        assert!((s * s - 1.0 / (5f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_on_periodic_box_is_exact() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 64)]).unwrap();
        let v = ScalarField::constant(g, Boundary::Periodic, 0.0).unwrap();
        for kt in [0.0, 0.3] {
            let p = LogSEProblem::new(v.clone(), 0.2, kt).unwrap();
            let sol = solve(&p).unwrap();
            assert!(sol.residual < 1e-12, "{}", sol.residual);
            let r0 = sol.log_density.values()[0];
            assert!(sol.log_density.values().iter().all(|r| (r - r0).abs() < 1e-12));
            if kt > 0.0 {
                assert!(fixed_point_residual(&sol.density, &p).unwrap() < 1e-9);
                let exact = ScalarField::constant(p.grid().clone(), Boundary::Periodic, 1.0).unwrap();
                assert!(fixed_point_residual(&exact, &p).unwrap() < 1e-14);
            }
            assert!(effective_force(&sol.density, &p).unwrap().max_norm() < 1e-9);
        }
    }

    #[test]
    fn harmonic_gausson_matches_scalar_root() {
        let p = LogSEProblem::new(harmonic(1024, 10.0, 1.0), 0.5, 0.5).unwrap();
        let sol = solve(&p).unwrap();
        let s = gausson_width(1.0, 0.5, 0.5).unwrap();
        assert!((sol.width(0) / s - 1.0).abs() < 1e-4, "{} vs {s}", sol.width(0));
        assert!((integrate(&sol.density) - 1.0).abs() < 1e-10);
        assert!(sol.density.min_value() > 0.0);
    }

    #[test]
    fn fixed_point_and_force_closure() {
        let p = LogSEProblem::new(harmonic(512, 10.0, 1.0), 0.5, 0.5).unwrap();
        let sol = solve(&p).unwrap();
        let fp = fixed_point_residual(&sol.density, &p).unwrap();
        assert!(fp < 10.0 * p.tolerance, "fixed-point residual {fp}");
        let perturbed = ScalarField::from_fn(p.grid().clone(), Boundary::Dirichlet, |x| {
            let i = ((x[0] + 10.0) / p.grid().spacing(0)).round() as usize;
            sol.density.values()[i] * (1.0 + 0.01 * x[0])
        });
        // 1 + 0.01 x is positive on [-10, 10) except at the left edge.
        let perturbed = perturbed.unwrap().map(|r| r.max(DENSITY_FLOOR));
        assert!(fixed_point_residual(&perturbed, &p).unwrap() > 1e3 * fp);

        let fe = effective_force(&sol.density, &p).unwrap();
        let ft = thermal_force(&sol.density, p.thermal_energy).unwrap();
        let scale = ft.max_norm();
        let peak = sol.density.max_value();
        let worst = (0..p.grid().len())
            .filter(|&i| sol.density.values()[i] > SUPPORT_FRACTION * peak)
            .map(|i| (fe.component(0)[i] - ft.component(0)[i]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 10.0 * p.tolerance * scale, "closure {worst}");
        // Force is linear with slope -kT/σ².
        let g = p.grid();
        let s2 = sol.width(0).powi(2);
        let i = g.len() / 2 + 40;
        let slope = ft.component(0)[i] / g.coords(i)[0];
        assert!((slope + 0.5 / s2).abs() < 1e-3 * (0.5 / s2));
    }

    #[test]
    fn rescaling_density_shifts_eigenvalue_by_log() {
        let p = LogSEProblem::new(harmonic(256, 8.0, 1.0), 0.5, 0.7).unwrap();
        let sol = solve(&p).unwrap();
        let lam1 = rayleigh_quotient(&p, &sol.density).unwrap();
        let lam4 = rayleigh_quotient(&p, &sol.density.scale(4.0)).unwrap();
        assert!((lam1 - sol.eigenvalue).abs() < 1e-12);
        assert!((lam4 - lam1 - 2.0 * 0.7 * 4f64.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn gibbs_limit_examples() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 16)]).unwrap();
        let flat = gibbs_limit(&ScalarField::constant(g, Boundary::Dirichlet, 5.0).unwrap(), 2.0).unwrap();
        assert!(flat.values().iter().all(|r| (r - 1.0).abs() < 1e-12));

        let v = harmonic(801, 10.0, 2.0);
        let rho = gibbs_limit(&v, 0.5).unwrap();
        let g = v.grid();
        let var: f64 = (0..g.len()).map(|i| g.coords(i)[0].powi(2) * rho.values()[i] * g.node_weight(i, Boundary::Dirichlet)).sum();
        assert!((var / 0.25 - 1.0).abs() < 1e-8);

        // Huge V/kT does not overflow.
        let steep = v.scale(1e6);
        let rho = gibbs_limit(&steep, 1e-3).unwrap();
        assert!(rho.values().iter().all(|r| r.is_finite()));
    }

    #[test]
    fn weak_damping_still_converges() {
        for damping in [5.0, 1e6] {
            for kt in [0.5, 50.0] {
                let p = LogSEProblem::new(harmonic(256, 8.0, 1.0), 0.5, kt).unwrap().with_damping(damping);
                assert!(solve(&p).is_ok(), "damping {damping}, kT {kt}");
            }
        }
    }

    #[test]
    fn monitor_flags_growth_and_oscillation() {
        let mut m = ResidualMonitor::default();
        let mut err = None;
        for k in 0..20 {
            if let Err(e) = m.observe(1e-3 * 10f64.powi(k)) {
                err = Some(e);
                break;
            }
        }
        assert!(err.unwrap().contains("grew"));

        let mut m = ResidualMonitor::default();
        let mut err = None;
        for k in 0..200 {
            let r = if k % 2 == 0 { 0.1 } else { 0.2 };
            if let Err(e) = m.observe(r) {
                err = Some(e);
                break;
            }
        }
        assert!(err.unwrap().contains("oscillates"));

        let mut m = ResidualMonitor::default();
        assert!((0..500).all(|k| m.observe(0.9f64.powi(k)).is_ok()));
        assert!(ResidualMonitor::default().observe(f64::NAN).is_err());
    }

    #[test]
    fn iteration_budget_exhaustion_is_a_convergence_error() {
        let p = LogSEProblem::new(harmonic(256, 8.0, 1.0), 0.5, 0.5)
            .unwrap()
            .with_max_iterations(2);
        assert!(matches!(solve(&p), Err(Error::Convergence { .. })));
    }

    #[test]
    fn open_boundary_and_bad_inputs_are_rejected() {
        let v = harmonic(32, 4.0, 1.0);
        assert!(LogSEProblem::new(v.clone().with_boundary(Boundary::Open), 0.5, 0.5).is_err());
        assert!(LogSEProblem::new(v.clone(), 0.0, 0.5).is_err());
        assert!(LogSEProblem::new(v, 0.5, -1.0).is_err());
    }

    #[test]
    fn two_dimensional_separable_gausson() {
        let g = Grid::uniform(2, -7.0, 7.0, 71).unwrap();
        let v = ScalarField::from_fn(g, Boundary::Dirichlet, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let p = LogSEProblem::new(v, 0.5, 0.5).unwrap().with_tolerance(1e-9);
        let sol = solve(&p).unwrap();
        let s = gausson_width(1.0, 0.5, 0.5).unwrap();
        // Coarse grid: second-order discretisation error only.
        assert!((sol.width(0) / s - 1.0).abs() < 5e-3);
        assert!((sol.width(0) - sol.width(1)).abs() < 1e-9);
    }
}
