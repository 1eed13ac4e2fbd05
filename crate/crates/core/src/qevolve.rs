//! Time-dependent Schrödinger evolution on a grid.
//!
//! Stepping is Crank–Nicolson, `(1 + iΔt H/2ħ) ψ' = (1 − iΔt H/2ħ) ψ`, with a
//! Thomas solve in 1D, a cyclic solve for periodic 1D grids and COCG above
//! that. The logarithmic variant adds `kT ln|ψ|²` to the potential, evaluated
//! at a predicted half-step density. Because the added term is real, each step
//! stays unitary.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{derivative, gradient, integrate, laplacian_into, Boundary, ComplexField, Grid, ScalarField, VectorField};
use crate::linalg::{conjugate_gradient, solve_cyclic_tridiagonal, solve_tridiagonal};
use crate::logse::DENSITY_FLOOR;

/// Largest allowed `Δt E_max / ħ`.
pub const PHASE_LIMIT: f64 = 0.1;
const NORM_TOLERANCE: f64 = 1e-8;
const EDGE_TOLERANCE: f64 = 1e-8;
const KRYLOV_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub psi: ComplexField,
    /// g
    pub mass: f64,
    /// statC
    pub charge: f64,
    pub hbar: f64,
    /// s
    pub time: f64,
}

impl WaveFunction {
    /// Checks normalisation and, on non-periodic grids, that the amplitude
    /// at the grid edge is negligible.
    pub fn new(psi: ComplexField, mass: f64, charge: f64, hbar: f64, time: f64) -> Result<Self> {
        if !(mass > 0.0 && hbar > 0.0 && mass.is_finite() && hbar.is_finite() && charge.is_finite() && time.is_finite()) {
            return invalid("wave function needs finite m > 0, ħ > 0, finite q and t");
        }
        if psi.boundary() == Boundary::Open {
            return invalid("wave functions use Dirichlet or periodic boundaries");
        }
        let wf = WaveFunction {
            psi,
            mass,
            charge,
            hbar,
            time,
        };
        let norm = wf.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return invalid(format!("wave function norm is {norm}, expected 1"));
        }
        let edge = wf.edge_ratio();
        if edge > EDGE_TOLERANCE {
            return invalid(format!("edge amplitude is {edge:.2e} of the peak; enlarge the grid"));
        }
        Ok(wf)
    }

    /// Normalises `psi` first, then validates as [`WaveFunction::new`].
    pub fn normalized(psi: ComplexField, mass: f64, charge: f64, hbar: f64, time: f64) -> Result<Self> {
        let n = integrate(&psi.norm_sqr());
        if !(n > 0.0 && n.is_finite()) {
            return invalid("cannot normalise a zero wave function");
        }
        WaveFunction::new(psi.scale(1.0 / n.sqrt()), mass, charge, hbar, time)
    }

    /// Gaussian packet with density standard deviation `sigma` per axis,
    /// centred at `center`, carrying mean momentum `momentum`.
    #[allow(clippy::too_many_arguments)]
    pub fn gaussian(
        grid: Grid,
        boundary: Boundary,
        center: &[f64],
        sigma: f64,
        momentum: &[f64],
        mass: f64,
        charge: f64,
        hbar: f64,
    ) -> Result<Self> {
        let d = grid.dim();
        if center.len() != d || momentum.len() != d || !(sigma > 0.0) {
            return invalid("packet centre and momentum must match the grid dimension, σ > 0");
        }
        let psi = ComplexField::from_fn(grid, boundary, |x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for k in 0..d {
                r2 += (x[k] - center[k]).powi(2);
                phase += momentum[k] * x[k] / hbar;
            }
            Complex64::from_polar((-r2 / (4.0 * sigma * sigma)).exp(), phase)
        })?;
        WaveFunction::normalized(psi, mass, charge, hbar, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        self.psi.grid()
    }

    pub fn norm(&self) -> f64 {
        integrate(&self.psi.norm_sqr())
    }

    pub fn density(&self) -> ScalarField {
        self.psi.norm_sqr()
    }

    /// Largest edge amplitude over the peak amplitude; 0 on periodic grids.
    pub fn edge_ratio(&self) -> f64 {
        if self.psi.boundary() == Boundary::Periodic {
            return 0.0;
        }
        let g = self.psi.grid();
        let peak = self.psi.max_abs();
        let edge = (0..g.len())
            .filter(|&i| g.is_edge(i))
            .map(|i| self.psi.values()[i].norm())
            .fold(0.0, f64::max);
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }

    /// `⟨ψ|H|ψ⟩` for the static potential `v`.
    pub fn energy(&self, v: &ScalarField) -> Result<f64> {
        check_potential(self, v)?;
        let mut hpsi = vec![Complex64::new(0.0, 0.0); self.grid().len()];
        apply_hamiltonian(self, v.values(), self.psi.values(), &mut hpsi);
        let w = self.grid().weights(self.psi.boundary());
        Ok(self
            .psi
            .values()
            .iter()
            .zip(&hpsi)
            .zip(&w)
            .map(|((p, h), w)| (p.conj() * h).re * w)
            .sum())
    }
}

fn check_potential(wf: &WaveFunction, v: &ScalarField) -> Result<()> {
    if v.grid() != wf.grid() {
        return invalid("potential and wave function live on different grids");
    }
    Ok(())
}

fn kinetic_prefactor(wf: &WaveFunction) -> f64 {
    wf.hbar * wf.hbar / (2.0 * wf.mass)
}

fn apply_hamiltonian(wf: &WaveFunction, v: &[f64], src: &[Complex64], dst: &mut [Complex64]) {
    laplacian_into(wf.grid(), wf.psi.boundary(), src, dst);
    let c = -kinetic_prefactor(wf);
    dst.par_iter_mut()
        .zip(src)
        .zip(v)
        .with_min_len(1024)
        .for_each(|((d, s), v)| *d = *d * c + s * *v);
}

/// Upper bound on the spectrum of the discrete Hamiltonian.
pub fn max_energy(grid: &Grid, mass: f64, hbar: f64, v: &[f64]) -> f64 {
    let kinetic: f64 = (0..grid.dim()).map(|k| 4.0 / grid.spacing(k).powi(2)).sum::<f64>() * hbar * hbar / (2.0 * mass);
    kinetic + v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// One Crank–Nicolson step with potential `v`.
fn cn_step(wf: &WaveFunction, v: &[f64], dt: f64, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    let grid = wf.grid();
    let bc = wf.psi.boundary();
    let n = grid.len();
    let half = Complex64::new(0.0, 0.5 * dt / wf.hbar);
    let mut hpsi = vec![Complex64::new(0.0, 0.0); n];
    apply_hamiltonian(wf, v, psi, &mut hpsi);
    let rhs: Vec<Complex64> = psi.iter().zip(&hpsi).map(|(p, h)| p - half * h).collect();
    if grid.dim() == 1 {
        let h = grid.spacing(0);
        let off = -kinetic_prefactor(wf) / (h * h);
        let lower = vec![half * off; n];
        let upper = lower.clone();
        let diag: Vec<Complex64> = v.iter().map(|v| Complex64::new(1.0, 0.0) + half * (v - 2.0 * off)).collect();
        return if bc == Boundary::Periodic {
            solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs)
        } else {
            solve_tridiagonal(&lower, &diag, &upper, &rhs)
        };
    }
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        apply_hamiltonian(wf, v, x, out);
        out.par_iter_mut().zip(x).with_min_len(1024).for_each(|(o, x)| *o = x + half * *o);
    };
    let (x, _) = conjugate_gradient(apply, &rhs, Some(psi), KRYLOV_TOLERANCE, 500).map_err(|e| match e {
        Error::Convergence { iterations, residual, .. } => Error::Convergence {
            what: "Crank–Nicolson linear solve",
            iterations,
            residual,
        },
        e => e,
    })?;
    Ok(x)
}

fn log_potential(v: &[f64], kt: f64, density: impl Iterator<Item = f64>) -> Vec<f64> {
    v.iter().zip(density).map(|(v, r)| v + kt * r.max(DENSITY_FLOOR).ln()).collect()
}

/// Crank–Nicolson propagator for a fixed potential and optional log coupling.
#[derive(Debug, Clone)]
pub struct Propagator {
    potential: Vec<f64>,
    kt: f64,
    dt: f64,
}

impl Propagator {
    /// Validates `Δt E_max / ħ < PHASE_LIMIT`. For the log coupling `E_max`
    /// includes `kT |ln ρ|` at the density floor.
    pub fn new(wf: &WaveFunction, v: &ScalarField, kt: f64, dt: f64) -> Result<Self> {
        check_potential(wf, v)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid("time step must be positive");
        }
        if !(kt >= 0.0 && kt.is_finite()) {
            return invalid("kT must be finite and >= 0");
        }
        let mut e_max = max_energy(wf.grid(), wf.mass, wf.hbar, v.values());
        if kt > 0.0 {
            e_max += kt * DENSITY_FLOOR.ln().abs();
        }
        let phase = dt * e_max / wf.hbar;
        if phase >= PHASE_LIMIT {
            return invalid(format!(
                "Δt E_max/ħ = {phase:.3} exceeds {PHASE_LIMIT}; use Δt < {:.3e}",
                PHASE_LIMIT * wf.hbar / e_max
            ));
        }
        Ok(Propagator {
            potential: v.values().to_vec(),
            kt,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, wf: &mut WaveFunction) -> Result<()> {
        let psi = wf.psi.values();
        let next = if self.kt == 0.0 {
            cn_step(wf, &self.potential, self.dt, psi)?
        } else {
            let v0 = log_potential(&self.potential, self.kt, psi.iter().map(|p| p.norm_sqr()));
            let predicted = cn_step(wf, &v0, self.dt, psi)?;
            let mid = psi.iter().zip(&predicted).map(|(a, b)| 0.5 * (a.norm_sqr() + b.norm_sqr()));
            let vh = log_potential(&self.potential, self.kt, mid);
            cn_step(wf, &vh, self.dt, psi)?
        };
        if let Some(i) = next.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Diagnostic(format!("non-finite amplitude at node {i} after a step")));
        }
        wf.psi = ComplexField::new(wf.grid().clone(), wf.psi.boundary(), next)?;
        wf.time += self.dt;
        Ok(())
    }
}

fn step_count(t: f64, dt: f64) -> Result<usize> {
    if !(t >= 0.0 && t.is_finite() && dt > 0.0) {
        return invalid("evolution time must be >= 0 and Δt > 0");
    }
    let r = t / dt;
    if (r - r.round()).abs() > 1e-6 * r.max(1.0) {
        return invalid(format!("t = {t} is not a whole number of steps of {dt}"));
    }
    Ok(r.round() as usize)
}

/// Evolves for `steps` steps, calling `visit` with the state after each
/// step (and once before the first).
pub fn evolve_observed(
    wf: &WaveFunction,
    v: &ScalarField,
    kt: f64,
    dt: f64,
    steps: usize,
    mut visit: impl FnMut(&WaveFunction) -> Result<()>,
) -> Result<WaveFunction> {
    let prop = Propagator::new(wf, v, kt, dt)?;
    let mut state = wf.clone();
    visit(&state)?;
    for _ in 0..steps {
        prop.step(&mut state)?;
        visit(&state)?;
    }
    Ok(state)
}

/// Linear evolution for time `t` in steps of `dt`.
pub fn evolve(wf: &WaveFunction, v: &ScalarField, t: f64, dt: f64) -> Result<WaveFunction> {
    evolve_observed(wf, v, 0.0, dt, step_count(t, dt)?, |_| Ok(()))
}

/// Evolution with the added potential `kT ln|ψ|²`.
pub fn evolve_log(wf: &WaveFunction, v: &ScalarField, kt: f64, t: f64, dt: f64) -> Result<WaveFunction> {
    evolve_observed(wf, v, kt, dt, step_count(t, dt)?, |_| Ok(()))
}

/// Charge density and current of a wave function.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentDensity {
    /// statC/cm³
    pub charge_density: ScalarField,
    /// statC/(cm² s)
    pub current: VectorField,
    pub time: f64,
}

/// `ρ_q = q|ψ|²`, `J = (qħ/m) Im(ψ* ∇ψ)` with central differences.
pub fn current(wf: &WaveFunction) -> CurrentDensity {
    let g = wf.grid();
    let d = g.dim();
    let coef = wf.charge * wf.hbar / wf.mass;
    let comps = (0..d)
        .map(|k| {
            let dpsi = derivative(&wf.psi, k);
            wf.psi
                .values()
                .iter()
                .zip(dpsi.values())
                .map(|(p, dp)| coef * (p.conj() * dp).im)
                .collect()
        })
        .collect();
    CurrentDensity {
        charge_density: wf.psi.norm_sqr().scale(wf.charge),
        current: VectorField::from_parts(g.clone(), wf.psi.boundary(), comps),
        time: wf.time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Position,
    /// `a = −∇V/m`.
    Acceleration,
    /// `|a|²`.
    AccelerationSquared,
}

/// Acceleration field `−∇V/m`, differenced with one-sided edge stencils
/// (periodic potentials wrap).
pub fn acceleration_field(v: &ScalarField, mass: f64) -> VectorField {
    let g = if v.boundary() == Boundary::Periodic {
        gradient(v)
    } else {
        gradient(&v.clone().with_boundary(Boundary::Open))
    };
    g.scale(-1.0 / mass)
}

/// `⟨ψ|O|ψ⟩`: a vector for position and acceleration, a one-element vector
/// for the squared acceleration.
pub fn expect(wf: &WaveFunction, observable: Observable, v: &ScalarField) -> Result<Vec<f64>> {
    check_potential(wf, v)?;
    let g = wf.grid();
    let d = g.dim();
    let rho = wf.density();
    let w = g.weights(rho.boundary());
    let weighted = |f: &dyn Fn(usize) -> f64| -> f64 { (0..g.len()).map(|i| rho.values()[i] * w[i] * f(i)).sum() };
    Ok(match observable {
        Observable::Position => (0..d).map(|k| weighted(&|i| g.coords(i)[k])).collect(),
        Observable::Acceleration => {
            let a = acceleration_field(v, wf.mass);
            (0..d).map(|k| weighted(&|i| a.component(k)[i])).collect()
        }
        Observable::AccelerationSquared => {
            let a2 = acceleration_field(v, wf.mass).norm_sqr();
            vec![weighted(&|i| a2.values()[i])]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{divergence, Axis};
    use proptest::prelude::*;

    fn line(l: f64, n: usize) -> Grid {
        Grid::new(vec![Axis::new(-l, l, n)]).unwrap()
    }

    fn zero(g: &Grid) -> ScalarField {
        ScalarField::constant(g.clone(), Boundary::Dirichlet, 0.0).unwrap()
    }

    fn width2(wf: &WaveFunction) -> f64 {
        let v = zero(wf.grid());
        let m = expect(wf, Observable::Position, &v).unwrap()[0];
        let g = wf.grid();
        let w = g.weights(Boundary::Dirichlet);
        let rho = wf.density();
        (0..g.len()).map(|i| rho.values()[i] * w[i] * (g.coords(i)[0] - m).powi(2)).sum()
    }

    #[test]
    fn free_gaussian_spreads_analytically() {
        let g = line(20.0, 801);
        let s0 = 1.0;
        let wf = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[0.0], s0, &[0.0], 1.0, 1.0, 1.0).unwrap();
        let v = zero(&g);
        let t = 2.0;
        let out = evolve(&wf, &v, t, 1e-4).unwrap();
        let expected = s0 * s0 + (t / (2.0 * s0)).powi(2);
        let got = width2(&out);
        assert!(((got - expected) / expected).abs() < 1e-3, "{got} vs {expected}");
        assert!((out.time - t).abs() < 1e-9);
        assert!((out.norm() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn norm_is_preserved_over_a_thousand_steps() {
        let g = Grid::uniform(2, -10.0, 10.0, 51).unwrap();
        let wf = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[0.5, -0.5], 1.0, &[0.5, 0.2], 1.0, 1.0, 1.0).unwrap();
        let v = ScalarField::from_fn(g, Boundary::Dirichlet, |x| 0.05 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let mut worst: f64 = 0.0;
        let mut prev = wf.norm();
        let e0 = wf.energy(&v).unwrap();
        let out = evolve_observed(&wf, &v, 0.0, 2.5e-3, 1000, |s| {
            let n = s.norm();
            worst = worst.max((n - prev).abs());
            prev = n;
            Ok(())
        })
        .unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-7);
        assert!(worst < 1e-10, "per-step drift {worst}");
        let e1 = out.energy(&v).unwrap();
        assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
    }

    #[test]
    fn coherent_state_oscillates_at_omega() {
        let g = line(10.0, 401);
        let omega = 1.0;
        let v = ScalarField::from_fn(g.clone(), Boundary::Dirichlet, |x| 0.5 * omega * omega * x[0] * x[0]).unwrap();
        let s0 = (1.0 / (2.0 * omega)).sqrt();
        let wf = WaveFunction::gaussian(g, Boundary::Dirichlet, &[2.0], s0, &[0.0], 1.0, 1.0, 1.0).unwrap();
        let period = 2.0 * std::f64::consts::PI / omega;
        let steps = 60_000;
        let dt = period / steps as f64;
        let mut xs = Vec::new();
        evolve_observed(&wf, &v, 0.0, dt, steps, |s| {
            xs.push(expect(s, Observable::Position, &v)?[0]);
            Ok(())
        })
        .unwrap();
        let second_half = &xs[steps / 2..];
        let top = second_half.iter().cloned().fold(f64::MIN, f64::max);
        let bottom = xs.iter().cloned().fold(f64::MAX, f64::min);
        assert!((top - 2.0).abs() / 2.0 < 1e-3, "amplitude after one period {top}");
        assert!((bottom + 2.0).abs() / 2.0 < 1e-3, "amplitude at half period {bottom}");
        // The first downward zero crossing sits at a quarter period.
        let k = xs.windows(2).position(|w| w[0] > 0.0 && w[1] <= 0.0).unwrap();
        let t0 = (k as f64 + xs[k] / (xs[k] - xs[k + 1])) * dt;
        let measured = std::f64::consts::FRAC_PI_2 / t0;
        assert!((measured - omega).abs() / omega < 2e-3, "frequency {measured}");
    }

    #[test]
    fn log_evolution_with_zero_coupling_is_bitwise_linear() {
        let g = line(10.0, 201);
        let wf = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[0.0], 1.0, &[0.3], 1.0, 1.0, 1.0).unwrap();
        let v = zero(&g);
        let a = evolve(&wf, &v, 0.1, 4e-4).unwrap();
        let b = evolve_log(&wf, &v, 0.0, 0.1, 4e-4).unwrap();
        assert_eq!(a, b);
    }

    /// Maximum |d²⟨x⟩/dt²| from second differences of ⟨x⟩ sampled every
    /// `stride` steps, plus the final state.
    fn dipole_acceleration(wf: &WaveFunction, kt: f64, dt: f64, stride: usize, samples: usize) -> (f64, WaveFunction) {
        let v = zero(wf.grid());
        let mut xs = Vec::new();
        let mut count = 0;
        let out = evolve_observed(wf, &v, kt, dt, stride * samples, |s| {
            if count % stride == 0 {
                xs.push(expect(s, Observable::Position, &v)?[0]);
            }
            count += 1;
            Ok(())
        })
        .unwrap();
        let big = dt * stride as f64;
        let acc = xs.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]) / (big * big)).fold(0.0, |m: f64, a| m.max(a.abs()));
        (acc, out)
    }

    #[test]
    fn log_term_leaves_the_dipole_unaccelerated_at_the_bound_scale() {
        let c = crate::units::PhysicalConstants::ELECTRON;
        let kt = crate::units::ev_to_erg(3.3e-15);
        let sigma = 1e-4;
        let g = Grid::new(vec![Axis::new(-15.0 * sigma, 15.0 * sigma, 601)]).unwrap();
        let p = 0.8 * c.hbar / sigma;
        let wf = WaveFunction::gaussian(g, Boundary::Dirichlet, &[-sigma], sigma, &[p], c.mass, c.charge, c.hbar).unwrap();
        let t_unit = c.mass * sigma * sigma / c.hbar;
        let (acc, out) = dipole_acceleration(&wf, kt, 5e-5 * t_unit, 200, 10);
        let scale = c.hbar * c.hbar / (c.mass * c.mass * sigma.powi(3)) + kt / (c.mass * sigma);
        assert!(acc / scale < 1e-8, "relative dipole acceleration {}", acc / scale);
        assert!((out.norm() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn log_term_dipole_error_is_second_order_in_the_spacing() {
        let run = |n: usize, dt: f64| {
            let g = line(15.0, n);
            let wf = WaveFunction::gaussian(g, Boundary::Dirichlet, &[-1.0], 1.0, &[0.8], 1.0, 1.0, 1.0).unwrap();
            let steps_per_sample = (0.01 / dt).round() as usize;
            dipole_acceleration(&wf, 0.5, dt, steps_per_sample, 10)
        };
        let (coarse, _) = run(301, 1e-4);
        let (fine, out) = run(601, 5e-5);
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        assert!(fine < 1e-4);
        assert!((out.norm() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn real_wave_functions_carry_no_current() {
        let g = Grid::uniform(2, -10.0, 10.0, 81).unwrap();
        let wf = WaveFunction::gaussian(g, Boundary::Dirichlet, &[0.0, 0.0], 1.0, &[0.0, 0.0], 1.0, 2.0, 1.0).unwrap();
        let j = current(&wf);
        assert_eq!(j.current.max_norm(), 0.0);
        assert!((integrate(&j.charge_density) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn plane_wave_current_is_velocity_times_density() {
        let n = 64;
        let l = 2.0 * std::f64::consts::PI;
        let g = Grid::new(vec![Axis::new(0.0, l * (n - 1) as f64 / n as f64, n)]).unwrap();
        let kw = 3.0;
        let (m, q, hbar) = (2.0, 1.5, 0.7);
        let psi = ComplexField::from_fn(g, Boundary::Periodic, |x| Complex64::from_polar(1.0, kw * x[0])).unwrap();
        let wf = WaveFunction::normalized(psi, m, q, hbar, 0.0).unwrap();
        let j = current(&wf);
        let h = l / n as f64;
        // Central differences see sin(kh)/h in place of k.
        let p_eff = hbar * (kw * h).sin() / h;
        let rho = wf.density().values()[0];
        for v in j.current.component(0) {
            assert!((v - q * p_eff / m * rho).abs() < 1e-12);
        }
        assert!(((p_eff - hbar * kw) / (hbar * kw)).abs() < (kw * h).powi(2));
    }

    #[test]
    fn continuity_holds_to_discretisation_order() {
        let g = line(12.0, 481);
        let wf = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[0.0], 1.0, &[1.0], 1.0, 1.0, 1.0).unwrap();
        let v = zero(&g);
        let dt = 1e-4;
        let a = evolve(&wf, &v, dt, dt).unwrap();
        let b = evolve(&a, &v, dt, dt).unwrap();
        let drho = b.density().zip_map(&wf.density(), |x, y| (x - y) / (2.0 * dt)).unwrap();
        let div = divergence(&current(&a).current);
        let res = drho.zip_map(&div, |x, y| x + y).unwrap().max_abs();
        let scale = div.max_abs();
        assert!(res < 1e-2 * scale, "residual {res} vs {scale}");
    }

    #[test]
    fn expectations() {
        let g = line(10.0, 401);
        let wf = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[0.0], 0.8, &[0.0], 1.0, 1.0, 1.0).unwrap();
        let v0 = zero(&g);
        assert!(expect(&wf, Observable::Position, &v0).unwrap()[0].abs() < 1e-10);

        let omega = 1.3f64;
        let (m, hbar) = (1.0f64, 1.0f64);
        let s0 = (hbar / (2.0 * m * omega)).sqrt();
        let ground = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[0.0], s0, &[0.0], m, 1.0, hbar).unwrap();
        let vh = ScalarField::from_fn(g.clone(), Boundary::Dirichlet, |x| 0.5 * m * omega * omega * x[0] * x[0]).unwrap();
        let a2 = expect(&ground, Observable::AccelerationSquared, &vh).unwrap()[0];
        let exact = omega.powi(3) * hbar / (2.0 * m);
        assert!(((a2 - exact) / exact).abs() < 1e-6, "{a2} vs {exact}");

        let vl = ScalarField::from_fn(g, Boundary::Dirichlet, |x| 0.7 * x[0]).unwrap();
        let a = expect(&wf, Observable::Acceleration, &vl).unwrap()[0];
        let a2 = expect(&wf, Observable::AccelerationSquared, &vl).unwrap()[0];
        assert!((a * a - a2).abs() < 1e-12);
    }

    #[test]
    fn time_step_precondition_is_enforced() {
        let g = line(10.0, 201);
        let wf = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[0.0], 1.0, &[0.0], 1.0, 1.0, 1.0).unwrap();
        let err = evolve(&wf, &zero(&g), 1.0, 0.01).unwrap_err();
        assert!(err.to_string().contains("E_max"), "{err}");
    }

    #[test]
    fn invalid_wave_functions_are_rejected() {
        let g = line(3.0, 61);
        let wide = ComplexField::from_fn(g.clone(), Boundary::Dirichlet, |x| Complex64::new((-x[0] * x[0] / 8.0).exp(), 0.0)).unwrap();
        assert!(WaveFunction::normalized(wide, 1.0, 1.0, 1.0, 0.0).is_err());
        let narrow = ComplexField::from_fn(g, Boundary::Dirichlet, |x| Complex64::new((-x[0] * x[0] * 4.0).exp(), 0.0)).unwrap();
        assert!(WaveFunction::new(narrow.clone(), 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(WaveFunction::normalized(narrow, -1.0, 1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn current_is_phase_invariant(theta in 0.0..std::f64::consts::TAU, p in -2.0..2.0f64) {
            let g = line(10.0, 201);
            let wf = WaveFunction::gaussian(g, Boundary::Dirichlet, &[0.3], 1.0, &[p], 1.0, 1.0, 1.0).unwrap();
            let mut rotated = wf.clone();
            let phase = Complex64::from_polar(1.0, theta);
            rotated.psi = wf.psi.map(|z| z * phase);
            let (a, b) = (current(&wf), current(&rotated));
            for (x, y) in a.current.component(0).iter().zip(b.current.component(0)) {
                prop_assert!((x - y).abs() < 1e-14);
            }
            for (x, y) in a.charge_density.values().iter().zip(b.charge_density.values()) {
                prop_assert!((x - y).abs() < 1e-14);
            }
        }

        #[test]
        fn evolution_commutes_with_translation(shift in 1usize..20) {
            let g = line(10.0, 201);
            let h = g.spacing(0);
            let s = shift as f64 * h;
            let v = |c: f64| ScalarField::from_fn(g.clone(), Boundary::Dirichlet, move |x| 0.3 * (x[0] - c).powi(2)).unwrap();
            let a = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[-1.0], 0.8, &[0.5], 1.0, 1.0, 1.0).unwrap();
            let b = WaveFunction::gaussian(g.clone(), Boundary::Dirichlet, &[-1.0 + s], 0.8, &[0.5], 1.0, 1.0, 1.0).unwrap();
            let ea = evolve(&a, &v(0.0), 0.1, 2e-4).unwrap();
            let eb = evolve(&b, &v(s), 0.1, 2e-4).unwrap();
            let xa = expect(&ea, Observable::Position, &v(0.0)).unwrap()[0];
            let xb = expect(&eb, Observable::Position, &v(s)).unwrap()[0];
            prop_assert!((xb - xa - s).abs() < 1e-6, "{} vs {}", xb - xa, s);
        }
    }
}
