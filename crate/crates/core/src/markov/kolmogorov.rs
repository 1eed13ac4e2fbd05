use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MarkovModel;
use crate::error::{invalid, Error, Result};
use crate::fields::{Boundary, Grid, ScalarField};

/// Bernoulli function `z / (e^z − 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Rows of a sparse operator: `(Lu)_i = −diag_i u_i + Σ coef u_col`.
#[derive(Debug, Clone)]
struct Rows {
    diag: Vec<f64>,
    start: Vec<usize>,
    col: Vec<usize>,
    coef: Vec<f64>,
}

impl Rows {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, o)| {
            let mut acc = -self.diag[i] * u[i];
            for e in self.start[i]..self.start[i + 1] {
                acc += self.coef[e] * u[self.col[e]];
            }
            *o = acc;
        });
    }
}

/// Conservative finite-volume discretisation of the diffusion on a grid.
///
/// Each face between neighbours carries a Scharfetter–Gummel flux, which is
/// exact for a constant velocity across the face and keeps any density with
/// `ν Δln ρ / h` face velocities exactly stationary. Non-periodic walls reflect.
#[derive(Debug, Clone)]
pub struct Generator {
    grid: Grid,
    boundary: Boundary,
    weights: Vec<f64>,
    forward: Rows,
    backward: Rows,
    max_rate: f64,
}

impl Generator {
    pub fn new(model: &MarkovModel, grid: &Grid, boundary: Boundary) -> Result<Self> {
        if grid.dim() != model.dim {
            return invalid(format!("grid has dimension {}, model has {}", grid.dim(), model.dim));
        }
        let boundary = if boundary == Boundary::Periodic {
            Boundary::Periodic
        } else {
            Boundary::Dirichlet
        };
        let n = grid.len();
        let d = grid.dim();
        let weights = grid.weights(boundary);
        // Per node: (neighbour, coefficient) in forward and backward rows.
        let mut fwd: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2 * d); n];
        let mut bwd: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2 * d); n];
        let mut diag = vec![0.0; n];
        for k in 0..d {
            let axis = grid.axis(k);
            let h = axis.spacing();
            let stride = grid.stride(k);
            for i in 0..n {
                let m = grid.multi_index(i);
                let j = if m[k] + 1 < axis.n {
                    i + stride
                } else if boundary == Boundary::Periodic {
                    i + stride - axis.n * stride
                } else {
                    continue;
                };
                let area: f64 = (0..d)
                    .filter(|&q| q != k)
                    .map(|q| grid.axis_weight(q, m[q], boundary))
                    .product();
                let v = model.face_velocity(grid, k, i, j);
                if !v.is_finite() {
                    return Err(Error::Diagnostic(format!(
                        "drift is not finite on the face between nodes {i} and {j}"
                    )));
                }
                // Flux from i to j is a p_i − b p_j.
                let (a, b) = if model.nu > 0.0 {
                    let pe = v * h / model.nu;
                    let g = area * model.nu / h;
                    (g * bernoulli(-pe), g * bernoulli(pe))
                } else {
                    (area * v.max(0.0), area * (-v).max(0.0))
                };
                diag[i] += a / weights[i];
                diag[j] += b / weights[j];
                fwd[i].push((j, b / weights[i]));
                fwd[j].push((i, a / weights[j]));
                bwd[i].push((j, a / weights[i]));
                bwd[j].push((i, b / weights[j]));
            }
        }
        let pack = |rows: Vec<Vec<(usize, f64)>>, diag: Vec<f64>| {
            let mut start = Vec::with_capacity(n + 1);
            let mut col = Vec::new();
            let mut coef = Vec::new();
            start.push(0);
            for r in rows {
                for (c, v) in r {
                    col.push(c);
                    coef.push(v);
                }
                start.push(col.len());
            }
            Rows { diag, start, col, coef }
        };
        let max_rate = diag.iter().cloned().fold(0.0, f64::max);
        Ok(Generator {
            grid: grid.clone(),
            boundary,
            weights,
            forward: pack(fwd, diag.clone()),
            backward: pack(bwd, diag),
            max_rate,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `Periodic`, or `Dirichlet` standing for reflecting walls.
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Control-volume weights; `Σ w_i P_i` is the conserved mass.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest explicit step that keeps the update positive and stable.
    pub fn max_stable_dt(&self) -> f64 {
        if self.max_rate > 0.0 {
            0.9 / self.max_rate
        } else {
            f64::INFINITY
        }
    }

    pub fn mass(&self, p: &[f64]) -> f64 {
        p.iter().zip(&self.weights).map(|(p, w)| p * w).sum()
    }

    pub fn apply_forward(&self, p: &[f64], out: &mut [f64]) {
        self.forward.apply(p, out)
    }

    pub fn apply_backward(&self, u: &[f64], out: &mut [f64]) {
        self.backward.apply(u, out)
    }

    /// Advances `u` through each checkpoint time in turn (non-decreasing,
    /// starting from 0) and hands each snapshot to `visit`. Steps are sized to
    /// land on the checkpoints exactly.
    fn run(
        &self,
        rows: &Rows,
        mut u: Vec<f64>,
        checkpoints: &[f64],
        track_mass: bool,
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<RunStats> {
        if checkpoints.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || checkpoints.windows(2).any(|w| w[1] < w[0]) {
            return invalid("evolution times must be finite, >= 0 and non-decreasing");
        }
        let n = u.len();
        let mut k1 = vec![0.0; n];
        let mut stage = vec![0.0; n];
        let mut stats = RunStats::default();
        let mut now = 0.0;
        let mass0 = if track_mass { self.mass(&u) } else { 0.0 };
        let mut mass_prev = mass0;
        let dt_max = self.max_stable_dt();
        for (c, &target) in checkpoints.iter().enumerate() {
            let span = target - now;
            if span > 0.0 {
                let steps = if dt_max.is_finite() { (span / dt_max).ceil().max(1.0) as usize } else { 1 };
                let dt = span / steps as f64;
                stats.dt = stats.dt.max(dt);
                for _ in 0..steps {
                    // Two-stage strong-stability-preserving Runge–Kutta.
                    rows.apply(&u, &mut k1);
                    stage.par_iter_mut().zip(&u).zip(&k1).for_each(|((s, u), k)| *s = u + dt * k);
                    rows.apply(&stage, &mut k1);
                    u.par_iter_mut()
                        .zip(&stage)
                        .zip(&k1)
                        .for_each(|((u, s), k)| *u = 0.5 * *u + 0.5 * (s + dt * k));
                    if track_mass {
                        let m = self.mass(&u);
                        stats.max_mass_change = stats.max_mass_change.max((m - mass_prev).abs() / mass0.abs().max(f64::MIN_POSITIVE));
                        mass_prev = m;
                    }
                }
                stats.steps += steps;
                now = target;
            }
            visit(c, &u);
        }
        Ok(stats)
    }

    /// Forward evolution with snapshots at each of `times`.
    pub fn evolve_forward(&self, p0: Vec<f64>, times: &[f64], visit: impl FnMut(usize, &[f64])) -> Result<RunStats> {
        self.run(&self.forward, p0, times, true, visit)
    }

    pub fn evolve_backward(&self, f: Vec<f64>, times: &[f64], visit: impl FnMut(usize, &[f64])) -> Result<RunStats> {
        self.run(&self.backward, f, times, false, visit)
    }

    /// Unit-mass cloud-in-cell delta at `x`.
    pub fn point_source(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.grid.dim();
        if x.len() != d {
            return invalid("source point has the wrong dimension");
        }
        let mut lo = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..d {
            let a = self.grid.axis(k);
            let mut s = (x[k] - a.min) / a.spacing();
            if self.boundary == Boundary::Periodic {
                s = s.rem_euclid(a.n as f64);
            } else if !(s >= 0.0 && s <= (a.n - 1) as f64) {
                return invalid(format!("source point {x:?} lies outside the grid"));
            }
            let i = (s.floor() as usize).min(a.n - 1);
            lo[k] = i;
            frac[k] = s - i as f64;
        }
        let mut p = vec![0.0; self.grid.len()];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut m = [0usize; 3];
            for k in 0..d {
                let n = self.grid.axis(k).n;
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    m[k] = if lo[k] + 1 < n { lo[k] + 1 } else { 0 };
                } else {
                    w *= 1.0 - frac[k];
                    m[k] = lo[k];
                }
            }
            if w > 0.0 {
                let idx = self.grid.linear_index(&m[..d]);
                p[idx] += w / self.weights[idx];
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    /// Largest step actually taken.
    pub dt: f64,
    /// Largest per-step change of `Σ w P`, relative to the initial mass.
    pub max_mass_change: f64,
}

#[derive(Debug, Clone)]
pub struct KolmogorovSolution {
    pub field: ScalarField,
    pub stats: RunStats,
}

fn check_field(model: &MarkovModel, f: &ScalarField) -> Result<Generator> {
    if f.values().iter().any(|v| !v.is_finite()) {
        return invalid("input field must be finite");
    }
    Generator::new(model, f.grid(), f.boundary())
}

/// Evolves the density `p0` for time `t` under the forward equation.
pub fn kolmogorov_forward(model: &MarkovModel, p0: &ScalarField, t: f64) -> Result<KolmogorovSolution> {
    let gen = check_field(model, p0)?;
    if p0.values().iter().any(|&v| v < 0.0) {
        return invalid("initial density must be non-negative");
    }
    let mass = gen.mass(p0.values());
    if (mass - 1.0).abs() > 1e-6 {
        return invalid(format!("initial density must be normalised, mass is {mass}"));
    }
    let mut out = Vec::new();
    let stats = gen.evolve_forward(p0.values().to_vec(), &[t], |_, p| out = p.to_vec())?;
    Ok(KolmogorovSolution {
        field: ScalarField::from_parts(p0.grid().clone(), p0.boundary(), out),
        stats,
    })
}

/// `u(x) = E[f(x(t)) | x(0) = x]` from the backward equation.
pub fn kolmogorov_backward(model: &MarkovModel, f: &ScalarField, t: f64) -> Result<KolmogorovSolution> {
    let gen = check_field(model, f)?;
    let mut out = Vec::new();
    let stats = gen.evolve_backward(f.values().to_vec(), &[t], |_, u| out = u.to_vec())?;
    Ok(KolmogorovSolution {
        field: ScalarField::from_parts(f.grid().clone(), f.boundary(), out),
        stats,
    })
}

/// Grid transition kernels `P_t(·, x)` for a set of source points.
#[derive(Debug, Clone)]
pub struct TransitionDensity {
    grid: Grid,
    boundary: Boundary,
    weights: Vec<f64>,
    elapsed: f64,
    sources: Vec<Vec<f64>>,
    kernels: Vec<Vec<f64>>,
}

impl TransitionDensity {
    pub fn compute(gen: &Generator, sources: &[Vec<f64>], t: f64) -> Result<Self> {
        let kernels = sources
            .iter()
            .map(|x| {
                let mut out = Vec::new();
                gen.evolve_forward(gen.point_source(x)?, &[t], |_, p| out = p.to_vec())?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TransitionDensity {
            grid: gen.grid().clone(),
            boundary: gen.boundary(),
            weights: gen.weights().to_vec(),
            elapsed: t,
            sources: sources.to_vec(),
            kernels,
        })
    }

    /// Kernels started from every grid node, in node order.
    pub fn from_all_nodes(gen: &Generator, t: f64) -> Result<Self> {
        let d = gen.grid().dim();
        let sources: Vec<Vec<f64>> = (0..gen.grid().len()).map(|i| gen.grid().coords(i)[..d].to_vec()).collect();
        Self::compute(gen, &sources, t)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn sources(&self) -> &[Vec<f64>] {
        &self.sources
    }

    pub fn kernel(&self, source: usize) -> &[f64] {
        &self.kernels[source]
    }

    /// `|∫P(y, x) dy − 1|` for each source.
    pub fn mass_errors(&self) -> Vec<f64> {
        self.kernels
            .iter()
            .map(|k| (k.iter().zip(&self.weights).map(|(p, w)| p * w).sum::<f64>() - 1.0).abs())
            .collect()
    }

    /// `∫ P(y, x) g(y) dy` per source.
    pub fn expect(&self, g: &[f64]) -> Vec<f64> {
        self.kernels
            .iter()
            .map(|k| k.iter().zip(&self.weights).zip(g).map(|((p, w), g)| p * w * g).sum())
            .collect()
    }

    /// Chapman–Kolmogorov composition: the kernel of `self` followed by
    /// `then`, whose sources must be every node of the same grid.
    pub fn compose(&self, then: &TransitionDensity) -> Result<TransitionDensity> {
        if then.grid != self.grid || then.kernels.len() != self.grid.len() {
            return invalid("the second kernel must be sourced at every node of the same grid");
        }
        let n = self.grid.len();
        let kernels = self
            .kernels
            .iter()
            .map(|first| {
                let mut out = vec![0.0; n];
                for (z, (&pz, &wz)) in first.iter().zip(&self.weights).enumerate() {
                    let c = pz * wz;
                    if c != 0.0 {
                        for (o, q) in out.iter_mut().zip(&then.kernels[z]) {
                            *o += c * q;
                        }
                    }
                }
                out
            })
            .collect();
        Ok(TransitionDensity {
            grid: self.grid.clone(),
            boundary: self.boundary,
            weights: self.weights.clone(),
            elapsed: self.elapsed + then.elapsed,
            sources: self.sources.clone(),
            kernels,
        })
    }

    /// Weighted L¹ distance per source between two kernel sets.
    pub fn l1_distance(&self, other: &TransitionDensity) -> Result<Vec<f64>> {
        if other.grid != self.grid || other.kernels.len() != self.kernels.len() {
            return invalid("kernel sets are not comparable");
        }
        Ok(self
            .kernels
            .iter()
            .zip(&other.kernels)
            .map(|(a, b)| a.iter().zip(b).zip(&self.weights).map(|((a, b), w)| (a - b).abs() * w).sum())
            .collect())
    }
}
