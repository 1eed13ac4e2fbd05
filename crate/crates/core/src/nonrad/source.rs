//! Charge and current densities sampled on a grid over a time window.
//!
//! Samples are kept only on the support, node-major, so the two samples that
//! bracket a retarded time sit next to each other in memory. Time derivatives
//! are fourth-order finite differences of the samples, and values between
//! samples come from cubic Hermite interpolation. A smooth envelope switches
//! the source on and off at the window edges.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::{derivative, Boundary, Grid, ScalarField, VectorField};
use crate::qevolve::{current, Propagator, WaveFunction};

/// Nodes whose charge and current stay below this fraction of the peak for
/// the whole window are dropped.
pub const SUPPORT_CUTOFF: f64 = 1e-14;
/// Allowed relative drift of the total charge over the window.
pub const CHARGE_TOLERANCE: f64 = 1e-6;

/// ρ, ρ̇, J and J̇ at one node and time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeState {
    pub rho: f64,
    pub rho_dot: f64,
    pub j: [f64; 3],
    pub j_dot: [f64; 3],
}

/// Channels stored per (node, sample): ρ, Jx, Jy, Jz, then their time derivatives.
type Sample = [f64; 8];

#[derive(Debug, Clone, PartialEq)]
pub struct FourCurrent {
    grid: Grid,
    light_speed: f64,
    t0: f64,
    dt: f64,
    samples: usize,
    taper: f64,
    nodes: Vec<usize>,
    positions: Vec<[f64; 3]>,
    data: Vec<Sample>,
    total_charge: Vec<f64>,
    continuity_residual: f64,
}

/// Accumulates full-grid samples; [`SourceBuilder::finish`] trims to the
/// support and differentiates in time.
#[derive(Debug, Clone)]
pub struct SourceBuilder {
    grid: Grid,
    light_speed: f64,
    t0: f64,
    dt: f64,
    rho: Vec<Vec<f64>>,
    current: Vec<[Vec<f64>; 3]>,
    continuity: Vec<f64>,
}

impl SourceBuilder {
    pub fn new(grid: Grid, light_speed: f64, t0: f64, dt: f64) -> Result<Self> {
        if grid.dim() != 3 {
            return invalid("four-currents live on three-dimensional grids");
        }
        if !(light_speed > 0.0 && dt > 0.0 && t0.is_finite()) {
            return invalid("c and the sample step must be positive");
        }
        Ok(SourceBuilder {
            grid,
            light_speed,
            t0,
            dt,
            rho: Vec::new(),
            current: Vec::new(),
            continuity: Vec::new(),
        })
    }

    pub fn push(&mut self, rho: &ScalarField, j: &VectorField) -> Result<()> {
        if rho.grid() != &self.grid || j.grid() != &self.grid {
            return invalid("sample lives on a different grid");
        }
        // Continuity is checked against the divergence of the current at the
        // midpoint between consecutive samples.
        if let (Some(prev_rho), Some(prev_j)) = (self.rho.last(), self.current.last()) {
            let div = |c: &[Vec<f64>; 3]| -> Vec<f64> {
                let mut acc = vec![0.0; self.grid.len()];
                for (k, comp) in c.iter().enumerate() {
                    let f = ScalarField::new(self.grid.clone(), Boundary::Dirichlet, comp.clone()).expect("grid matches");
                    for (a, v) in acc.iter_mut().zip(derivative(&f, k).values()) {
                        *a += v;
                    }
                }
                acc
            };
            let now: [Vec<f64>; 3] = [0, 1, 2].map(|k| j.component(k).to_vec());
            let (d0, d1) = (div(prev_j), div(&now));
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..self.grid.len() {
                let rho_dot = (rho.values()[i] - prev_rho[i]) / self.dt;
                num += (rho_dot + 0.5 * (d0[i] + d1[i])).powi(2);
                den += rho_dot * rho_dot;
            }
            self.continuity.push(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() });
        }
        self.rho.push(rho.values().to_vec());
        self.current.push([0, 1, 2].map(|k| j.component(k).to_vec()));
        Ok(())
    }

    pub fn finish(self, taper: f64) -> Result<FourCurrent> {
        let n = self.rho.len();
        if n < 5 {
            return invalid("a four-current needs at least five samples");
        }
        let window = (n - 1) as f64 * self.dt;
        if !(taper >= 0.0 && 2.0 * taper <= window) {
            return invalid("taper must be non-negative and fit twice in the window");
        }
        let g = &self.grid;
        let rho_peak = self.rho.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let j_peak = self.current.iter().flat_map(|c| c.iter().flatten()).fold(0.0f64, |m, v| m.max(v.abs()));
        let nodes: Vec<usize> = (0..g.len())
            .filter(|&i| {
                (0..n).any(|k| {
                    self.rho[k][i].abs() > SUPPORT_CUTOFF * rho_peak
                        || (0..3).any(|c| self.current[k][c][i].abs() > SUPPORT_CUTOFF * j_peak)
                })
            })
            .collect();
        let positions = nodes.iter().map(|&i| g.coords(i)).collect();
        let cell = g.cell_volume();
        let total_charge: Vec<f64> = self.rho.iter().map(|r| r.iter().sum::<f64>() * cell).collect();
        let mut data = Vec::with_capacity(nodes.len() * n);
        let mut series = vec![0.0; n];
        let mut deriv = vec![0.0; n];
        for &i in &nodes {
            let mut block = vec![[0.0; 8]; n];
            for ch in 0..4 {
                for k in 0..n {
                    series[k] = if ch == 0 { self.rho[k][i] } else { self.current[k][ch - 1][i] };
                }
                differentiate(&series, self.dt, &mut deriv);
                for k in 0..n {
                    block[k][ch] = series[k];
                    block[k][ch + 4] = deriv[k];
                }
            }
            data.extend(block);
        }
        let q0 = total_charge[0];
        let scale = self
            .rho
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>() * cell)
            .fold(0.0f64, f64::max);
        let drift = total_charge.iter().fold(0.0f64, |m, q| m.max((q - q0).abs()));
        if scale > 0.0 && drift > CHARGE_TOLERANCE * scale {
            return invalid(format!("total charge drifts by {:.2e} of the absolute charge over the window", drift / scale));
        }
        Ok(FourCurrent {
            grid: self.grid,
            light_speed: self.light_speed,
            t0: self.t0,
            dt: self.dt,
            samples: n,
            taper,
            nodes,
            positions,
            data,
            total_charge,
            continuity_residual: self.continuity.iter().fold(0.0, |m: f64, v| m.max(*v)),
        })
    }
}

/// Fourth-order first derivative of a uniformly sampled series.
fn differentiate(f: &[f64], dt: f64, out: &mut [f64]) {
    let n = f.len();
    let c = 1.0 / (12.0 * dt);
    out[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    out[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    for k in 2..n - 2 {
        out[k] = c * (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]);
    }
    out[n - 2] = c * (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]);
    out[n - 1] = c * (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]);
}

/// Normalised discrete Gaussian `G` with `Σ G h³ = 1`.
fn discrete_gaussian(grid: &Grid, center: &[f64; 3], sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.coords(i);
            let r2: f64 = (0..3).map(|k| (x[k] - center[k]).powi(2)).sum();
            (-r2 / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum::<f64>() * grid.cell_volume();
    raw.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleSpec {
    pub center: [f64; 3],
    /// Gaussian smearing of the point dipole.
    pub sigma: f64,
    /// Peak dipole moment `q z₀` (statC cm).
    pub moment: f64,
    pub omega: f64,
    /// Unit direction of the moment.
    pub axis: [f64; 3],
}

impl FourCurrent {
    /// Samples the charge and current of `wf` evolving in the static
    /// potential `v`, one Crank–Nicolson step per sample.
    pub fn from_evolution(
        wf: &WaveFunction,
        v: &ScalarField,
        light_speed: f64,
        dt: f64,
        steps: usize,
        taper: f64,
    ) -> Result<(FourCurrent, WaveFunction)> {
        let prop = Propagator::new(wf, v, 0.0, dt)?;
        let mut b = SourceBuilder::new(wf.grid().clone(), light_speed, wf.time, dt)?;
        let mut state = wf.clone();
        for k in 0..=steps {
            if k > 0 {
                prop.step(&mut state)?;
            }
            let c = current(&state);
            b.push(&c.charge_density, &c.current)?;
        }
        Ok((b.finish(taper)?, state))
    }

    /// Smeared oscillating point dipole `d(t) = moment cos(ω t) axis` with
    /// `ρ = −d·∇G` and `J = ḋ G`. The gradient is the grid's central
    /// difference, so `∂ρ/∂t + ∇·J = 0` holds exactly on the grid at every
    /// instant. Only the time sampling leaves a residual.
    pub fn oscillating_dipole(
        grid: &Grid,
        spec: &DipoleSpec,
        light_speed: f64,
        t0: f64,
        dt: f64,
        samples: usize,
        taper: f64,
    ) -> Result<FourCurrent> {
        if !(spec.sigma > 0.0 && spec.omega.is_finite() && spec.moment.is_finite()) {
            return invalid("dipole needs σ > 0 and finite ω and moment");
        }
        let norm = spec.axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return invalid("dipole axis must be non-zero");
        }
        let axis = spec.axis.map(|a| a / norm);
        let g = discrete_gaussian(grid, &spec.center, spec.sigma);
        let gf = ScalarField::new(grid.clone(), Boundary::Dirichlet, g.clone())?;
        let grad: Vec<ScalarField> = (0..3).map(|k| derivative(&gf, k)).collect();
        let proj: Vec<f64> = (0..grid.len())
            .map(|i| (0..3).map(|k| axis[k] * grad[k].values()[i]).sum())
            .collect();
        let mut b = SourceBuilder::new(grid.clone(), light_speed, t0, dt)?;
        for k in 0..samples {
            let t = t0 + k as f64 * dt;
            let d = spec.moment * (spec.omega * t).cos();
            let d_dot = -spec.moment * spec.omega * (spec.omega * t).sin();
            let rho = ScalarField::new(grid.clone(), Boundary::Dirichlet, proj.iter().map(|p| -d * p).collect())?;
            let j = VectorField::new(
                grid.clone(),
                Boundary::Dirichlet,
                (0..3).map(|c| g.iter().map(|v| d_dot * axis[c] * v).collect()).collect(),
            )?;
            b.push(&rho, &j)?;
        }
        b.finish(taper)
    }

    /// A Gaussian blob of total charge `q` at rest.
    #[allow(clippy::too_many_arguments)]
    pub fn static_charge(
        grid: &Grid,
        center: [f64; 3],
        sigma: f64,
        q: f64,
        light_speed: f64,
        t0: f64,
        dt: f64,
        samples: usize,
    ) -> Result<FourCurrent> {
        if !(sigma > 0.0) {
            return invalid("σ must be positive");
        }
        let g = discrete_gaussian(grid, &center, sigma);
        let rho = ScalarField::new(grid.clone(), Boundary::Dirichlet, g.iter().map(|v| q * v).collect())?;
        let j = VectorField::new(grid.clone(), Boundary::Dirichlet, vec![vec![0.0; grid.len()]; 3])?;
        let mut b = SourceBuilder::new(grid.clone(), light_speed, t0, dt)?;
        for _ in 0..samples {
            b.push(&rho, &j)?;
        }
        b.finish(0.0)
    }

    /// The same source with every density multiplied by `s`.
    pub fn scaled(&self, s: f64) -> FourCurrent {
        let mut out = self.clone();
        for v in out.data.iter_mut().flatten() {
            *v *= s;
        }
        for q in &mut out.total_charge {
            *q *= s;
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn light_speed(&self) -> f64 {
        self.light_speed
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t0 + (self.samples - 1) as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn taper(&self) -> f64 {
        self.taper
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.samples).map(|k| self.t0 + k as f64 * self.dt).collect()
    }

    pub fn support_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn total_charge(&self) -> &[f64] {
        &self.total_charge
    }

    /// Largest relative residual of `ρ̇ + ∇·J` between consecutive samples.
    pub fn continuity_residual(&self) -> f64 {
        self.continuity_residual
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.cell_volume()
    }

    /// Largest distance from `center` to a support node.
    pub fn support_radius(&self, center: &[f64; 3]) -> f64 {
        self.positions
            .iter()
            .map(|p| (0..3).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Circumradius of the grid's bounding box about its centre.
    pub fn box_circumradius(&self) -> f64 {
        self.grid.circumradius()
    }

    fn envelope(&self, t: f64) -> (f64, f64) {
        let tau = self.taper;
        if tau == 0.0 {
            return (1.0, 0.0);
        }
        let (a, b) = (t - self.t0, self.end() - t);
        let ramp = |s: f64| {
            let x = FRAC_PI_2 * s / tau;
            (x.sin().powi(2), FRAC_PI_2 / tau * (2.0 * x).sin())
        };
        if a < tau {
            ramp(a)
        } else if b < tau {
            let (g, dg) = ramp(b);
            (g, -dg)
        } else {
            (1.0, 0.0)
        }
    }

    fn bracket(&self, t: f64) -> Option<(usize, f64)> {
        let s = (t - self.t0) / self.dt;
        let last = (self.samples - 1) as f64;
        if !(s >= 0.0 && s <= last) {
            return None;
        }
        let k = (s.floor() as usize).min(self.samples - 2);
        Some((k, s - k as f64))
    }

    /// Tapered state of support node `s` at time `t` by cubic Hermite
    /// interpolation; `None` outside the window.
    #[inline]
    pub fn state(&self, s: usize, t: f64) -> Option<NodeState> {
        let (k, u) = self.bracket(t)?;
        let a = &self.data[s * self.samples + k];
        let b = &self.data[s * self.samples + k + 1];
        let dt = self.dt;
        let (u2, u3) = (u * u, u * u * u);
        let (h00, h10, h01, h11) = (2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2);
        let (d00, d10, d01, d11) = (6.0 * u2 - 6.0 * u, 3.0 * u2 - 4.0 * u + 1.0, -6.0 * u2 + 6.0 * u, 3.0 * u2 - 2.0 * u);
        let mut val = [0.0; 4];
        let mut der = [0.0; 4];
        for c in 0..4 {
            val[c] = h00 * a[c] + h10 * dt * a[c + 4] + h01 * b[c] + h11 * dt * b[c + 4];
            der[c] = (d00 * a[c] + d01 * b[c]) / dt + d10 * a[c + 4] + d11 * b[c + 4];
        }
        let (g, dg) = self.envelope(t);
        Some(NodeState {
            rho: g * val[0],
            rho_dot: g * der[0] + dg * val[0],
            j: [g * val[1], g * val[2], g * val[3]],
            j_dot: [g * der[1] + dg * val[1], g * der[2] + dg * val[2], g * der[3] + dg * val[3]],
        })
    }

    /// Tapered `(ρ, J)` of node `s` at `t` by linear interpolation.
    #[inline]
    pub fn linear(&self, s: usize, t: f64) -> Option<(f64, [f64; 3])> {
        let (k, u) = self.bracket(t)?;
        let a = &self.data[s * self.samples + k];
        let b = &self.data[s * self.samples + k + 1];
        let (g, _) = self.envelope(t);
        let l = |c: usize| g * ((1.0 - u) * a[c] + u * b[c]);
        Some((l(0), [l(1), l(2), l(3)]))
    }

    /// Untapered sample `k` of node `s`: ρ and J.
    pub fn raw(&self, s: usize, k: usize) -> (f64, [f64; 3]) {
        let a = &self.data[s * self.samples + k];
        (a[0], [a[1], a[2], a[3]])
    }
}
