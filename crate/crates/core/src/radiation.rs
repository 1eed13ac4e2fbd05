//! Low-energy bremsstrahlung functionals over a shared evolution trace.
//!
//! Every finite entry is `(2q²/3c³) ∫ I(t) dt` for a model-specific
//! integrand `I`: the classical `|a|²`, the hydrodynamic `|⟨a⟩|²`, the QED
//! `⟨a²⟩`, the Bohmian `∫|a + F_QM/m|² ρ`, and the Newtonian ensemble mean of
//! `|a|²`. Stochastic mechanics is always [`Energy::Divergent`].

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::fields::{gradient, laplacian, to_momentum, Boundary, Grid, ScalarField, VectorField};
use crate::logse::DENSITY_FLOOR;
use crate::qevolve::{acceleration_field, evolve_observed, WaveFunction};
use crate::quadrature::trapezoid_nonuniform;
use crate::rng::stream_rng;
use crate::units::PhysicalConstants;

/// A radiated energy in erg, or the divergent sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Divergent,
}

impl Energy {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Energy::Finite(e) => Some(*e),
            Energy::Divergent => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Energy::Divergent)
    }
}

/// Divergent ranks above every finite energy.
impl PartialOrd for Energy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Energy::Finite(a), Energy::Finite(b)) => a.partial_cmp(b),
            (Energy::Divergent, Energy::Divergent) => Some(Ordering::Equal),
            (Energy::Divergent, Energy::Finite(_)) => Some(Ordering::Greater),
            (Energy::Finite(_), Energy::Divergent) => Some(Ordering::Less),
        }
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Energy::Finite(e) => write!(f, "{e:e}"),
            Energy::Divergent => write!(f, "divergent"),
        }
    }
}

impl Serialize for Energy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Energy::Finite(e) => s.serialize_f64(*e),
            Energy::Divergent => s.serialize_str("divergent"),
        }
    }
}

impl<'de> Deserialize<'de> for Energy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(e) => Ok(Energy::Finite(e)),
            Raw::Text(t) if t == "divergent" => Ok(Energy::Divergent),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"divergent\", got {t:?}"))),
        }
    }
}

/// `2q²/(3c³)`.
pub fn larmor_prefactor(q: f64, c: f64) -> f64 {
    2.0 * q * q / (3.0 * c * c * c)
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return invalid("a time series needs at least two samples");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return invalid("time grid must be finite and strictly increasing");
    }
    Ok(())
}

/// `(2q²/3c³) ∫ |a|² dt` by the trapezoid rule.
pub fn classical(times: &[f64], acceleration: &[Vec<f64>], q: f64, c: f64) -> Result<f64> {
    check_times(times)?;
    if acceleration.len() != times.len() {
        return invalid("acceleration series and time grid differ in length");
    }
    let a2: Vec<f64> = acceleration.iter().map(|a| a.iter().map(|x| x * x).sum()).collect();
    Ok(larmor_prefactor(q, c) * trapezoid_nonuniform(times, &a2))
}

/// Everything the six functionals read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// `⟨a⟩` per time.
    pub mean_acceleration: Vec<Vec<f64>>,
    /// `⟨|a|²⟩` per time.
    pub mean_square_acceleration: Vec<f64>,
    #[serde(skip)]
    pub densities: Vec<ScalarField>,
    /// Point-particle acceleration along the Newtonian trajectory started at
    /// the packet's initial mean position and momentum.
    pub classical_acceleration: Vec<Vec<f64>>,
    /// Positions of a Newtonian ensemble per time, when sampled.
    #[serde(skip)]
    pub ensemble: Option<Vec<Vec<Vec<f64>>>>,
}

impl EvolutionTrace {
    pub fn validate(&self) -> Result<()> {
        check_times(&self.times)?;
        let n = self.times.len();
        if self.mean_acceleration.len() != n
            || self.mean_square_acceleration.len() != n
            || self.densities.len() != n
            || self.classical_acceleration.len() != n
            || self.ensemble.as_ref().is_some_and(|e| e.len() != n)
        {
            return invalid("trace series lengths differ from the time grid");
        }
        for (k, (m, s)) in self.mean_acceleration.iter().zip(&self.mean_square_acceleration).enumerate() {
            let m2: f64 = m.iter().map(|x| x * x).sum();
            if s < &m2 {
                return invalid(format!("⟨a²⟩ < |⟨a⟩|² at time index {k}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleOptions {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceOptions {
    pub dt: f64,
    pub steps: usize,
    /// Record every `record_stride`-th step; the last step is always kept.
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub ensemble: Option<EnsembleOptions>,
}

fn one() -> usize {
    1
}

/// `⟨a⟩` and `⟨|a|²⟩` under the normalised density. The mean square is
/// accumulated as `|⟨a⟩|² + Var(a)` with the variance summed from
/// non-negative terms, so `⟨|a|²⟩ ≥ |⟨a⟩|²` holds in floating point.
pub fn acceleration_moments(rho: &ScalarField, accel: &VectorField) -> (Vec<f64>, f64) {
    let g = rho.grid();
    let d = g.dim();
    let w = g.weights(rho.boundary());
    let p: Vec<f64> = rho.values().iter().zip(&w).map(|(r, w)| r * w).collect();
    let mass: f64 = p.iter().sum();
    let mean: Vec<f64> = (0..d)
        .map(|k| p.iter().zip(accel.component(k)).map(|(p, a)| p * a).sum::<f64>() / mass)
        .collect();
    let var: f64 = (0..g.len())
        .map(|i| p[i] * (0..d).map(|k| (accel.component(k)[i] - mean[k]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / mass;
    let m2: f64 = mean.iter().map(|x| x * x).sum();
    (mean, m2 + var.max(0.0))
}

fn mean_momentum(wf: &WaveFunction) -> Vec<f64> {
    let g = wf.grid();
    let w = g.weights(wf.psi.boundary());
    (0..g.dim())
        .map(|k| {
            let dpsi = crate::fields::derivative(&wf.psi, k);
            wf.hbar
                * wf.psi
                    .values()
                    .iter()
                    .zip(dpsi.values())
                    .zip(&w)
                    .map(|((p, dp), w)| (p.conj() * dp).im * w)
                    .sum::<f64>()
        })
        .collect()
}

/// Velocity-Verlet trajectory in the acceleration field, sampled at the
/// recorded steps. Leaving the grid is an error.
type Series = Vec<Vec<f64>>;

fn newton_trajectory(
    accel: &VectorField,
    x0: &[f64],
    v0: &[f64],
    dt: f64,
    steps: usize,
    recorded: &[usize],
) -> std::result::Result<(Series, Series), (usize, String)> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let at = |x: &[f64], step: usize| -> std::result::Result<[f64; 3], (usize, String)> {
        accel.sample(x).ok_or_else(|| (step, format!("trajectory left the grid at {x:?}")))
    };
    let mut a = at(&x, 0)?;
    let mut xs = Vec::with_capacity(recorded.len());
    let mut accs = Vec::with_capacity(recorded.len());
    let mut next = 0;
    for step in 0..=steps {
        if step > 0 {
            for k in 0..d {
                v[k] += 0.5 * dt * a[k];
                x[k] += dt * v[k];
            }
            a = at(&x, step)?;
            for k in 0..d {
                v[k] += 0.5 * dt * a[k];
            }
        }
        if recorded.get(next) == Some(&step) {
            xs.push(x.clone());
            accs.push(a[..d].to_vec());
            next += 1;
        }
    }
    Ok((xs, accs))
}

fn sample_index<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

impl EvolutionTrace {
    /// Evolves `wf` in the static potential `v` and records the trace. The
    /// classical trajectory and the optional ensemble are integrated with the
    /// same time step. Ensemble members start from independent draws of
    /// position from `|ψ|²` and momentum from `|ψ̃|²`, each jittered
    /// uniformly within one cell.
    pub fn from_evolution(wf: &WaveFunction, v: &ScalarField, options: &TraceOptions) -> Result<Self> {
        if options.record_stride == 0 {
            return invalid("record stride must be >= 1");
        }
        let accel = acceleration_field(v, wf.mass);
        let mut recorded: Vec<usize> = (0..=options.steps).step_by(options.record_stride).collect();
        if *recorded.last().unwrap() != options.steps {
            recorded.push(options.steps);
        }
        let mut times = Vec::new();
        let mut mean_acceleration = Vec::new();
        let mut mean_square_acceleration = Vec::new();
        let mut densities = Vec::new();
        let mut step = 0;
        let mut next = 0;
        evolve_observed(wf, v, 0.0, options.dt, options.steps, |s| {
            if recorded.get(next) == Some(&step) {
                let rho = s.density();
                let (m, m2) = acceleration_moments(&rho, &accel);
                times.push(s.time);
                mean_acceleration.push(m);
                mean_square_acceleration.push(m2);
                densities.push(rho);
                next += 1;
            }
            step += 1;
            Ok(())
        })?;

        let d = wf.grid().dim();
        let rho0 = wf.density();
        let w = wf.grid().weights(rho0.boundary());
        let norm: f64 = rho0.values().iter().zip(&w).map(|(r, w)| r * w).sum();
        let x0: Vec<f64> = (0..d)
            .map(|k| (0..w.len()).map(|i| rho0.values()[i] * w[i] * wf.grid().coords(i)[k]).sum::<f64>() / norm)
            .collect();
        let v0: Vec<f64> = mean_momentum(wf).iter().map(|p| p / norm / wf.mass).collect();
        let (_, classical_acceleration) = newton_trajectory(&accel, &x0, &v0, options.dt, options.steps, &recorded)
            .map_err(|(step, reason)| Error::Simulation { path: 0, step, reason })?;

        let ensemble = match &options.ensemble {
            None => None,
            Some(e) => Some(sample_ensemble(wf, &accel, e, options.dt, options.steps, &recorded)?),
        };
        let trace = EvolutionTrace {
            times,
            mean_acceleration,
            mean_square_acceleration,
            densities,
            classical_acceleration,
            ensemble,
        };
        trace.validate()?;
        Ok(trace)
    }
}

fn sample_ensemble(
    wf: &WaveFunction,
    accel: &VectorField,
    options: &EnsembleOptions,
    dt: f64,
    steps: usize,
    recorded: &[usize],
) -> Result<Vec<Vec<Vec<f64>>>> {
    if options.samples == 0 {
        return invalid("an ensemble needs at least one sample");
    }
    let g = wf.grid();
    let d = g.dim();
    let w = g.weights(wf.psi.boundary());
    let x_cdf = cumulative(wf.psi.values().iter().zip(&w).map(|(p, w)| p.norm_sqr() * w));
    let spectrum = to_momentum(&wf.psi, wf.hbar)?;
    let p_cdf = cumulative(spectrum.values().iter().map(|p| p.norm_sqr()));
    let dp: Vec<f64> = spectrum.axes().iter().map(|a| a.dp).collect();
    let paths: Vec<Vec<Vec<f64>>> = (0..options.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(options.seed, i as u64);
            let xi = sample_index(&x_cdf, &mut rng);
            let pi = sample_index(&p_cdf, &mut rng);
            let xc = g.coords(xi);
            let pc = spectrum.momentum(pi);
            let mut x0 = vec![0.0; d];
            let mut v0 = vec![0.0; d];
            for k in 0..d {
                let a = g.axis(k);
                let h = a.spacing();
                x0[k] = (xc[k] + (rng.random::<f64>() - 0.5) * h).clamp(a.min, a.max);
                v0[k] = (pc[k] + (rng.random::<f64>() - 0.5) * dp[k]) / wf.mass;
            }
            newton_trajectory(accel, &x0, &v0, dt, steps, recorded)
                .map(|(xs, _)| xs)
                .map_err(|(step, reason)| Error::Simulation { path: i, step, reason })
        })
        .collect::<Result<_>>()?;
    // Transpose to per-time sample sets.
    Ok((0..recorded.len()).map(|r| paths.iter().map(|p| p[r].clone()).collect()).collect())
}

/// `(2q²/3c³) ∫ |⟨a⟩|² dt`.
pub fn hydrodynamic(trace: &EvolutionTrace, q: f64, c: f64) -> Result<f64> {
    classical(&trace.times, &trace.mean_acceleration, q, c)
}

/// `(2q²/3c³) ∫ ⟨|a|²⟩ dt`.
pub fn qed(trace: &EvolutionTrace, q: f64, c: f64) -> Result<f64> {
    check_times(&trace.times)?;
    Ok(larmor_prefactor(q, c) * trapezoid_nonuniform(&trace.times, &trace.mean_square_acceleration))
}

/// Bohm's quantum force `−∇Q`, `Q = −(ħ²/2m) Δ√ρ/√ρ`, with ρ floored. The
/// Laplacian uses the density's boundary; the outer gradient uses one-sided
/// edge stencils unless the density is periodic.
pub fn quantum_force(rho: &ScalarField, hbar: f64, mass: f64) -> Result<VectorField> {
    if !(hbar > 0.0 && mass > 0.0) {
        return invalid("ħ and m must be positive");
    }
    if rho.values().iter().any(|&r| r < 0.0) {
        return invalid("density must be non-negative");
    }
    let amp = rho.map(|r| r.max(DENSITY_FLOOR).sqrt());
    let lap = laplacian(&amp);
    let c = -hbar * hbar / (2.0 * mass);
    let q = lap.zip_map(&amp, |l, a| c * l / a)?;
    let q = if rho.boundary() == Boundary::Periodic { q } else { q.with_boundary(Boundary::Open) };
    Ok(gradient(&q).scale(-1.0))
}

/// Per-time Bohmian integrand `∫ |a + F_QM/m|² ρ / ∫ρ`.
pub fn bohmian_integrand(rho: &ScalarField, accel: &VectorField, hbar: f64, mass: f64) -> Result<f64> {
    let f = quantum_force(rho, hbar, mass)?;
    let g = rho.grid();
    let d = g.dim();
    let w = g.weights(rho.boundary());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..g.len() {
        let p = rho.values()[i] * w[i];
        let s: f64 = (0..d).map(|k| (accel.component(k)[i] + f.component(k)[i] / mass).powi(2)).sum();
        num += p * s;
        den += p;
    }
    Ok(num / den)
}

/// `(2q²/3c³) ∫ dt ∫ |a(x) + F_QM(x)/m|² ρ(x,t) dx`, with `a = −∇V/m`.
pub fn bohmian(trace: &EvolutionTrace, v: &ScalarField, q: f64, c: f64, hbar: f64, mass: f64) -> Result<f64> {
    trace.validate()?;
    let accel = acceleration_field(v, mass);
    let integrand = trace
        .densities
        .par_iter()
        .map(|rho| {
            if rho.grid() != v.grid() {
                return invalid("density snapshots and potential live on different grids");
            }
            bohmian_integrand(rho, &accel, hbar, mass)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(larmor_prefactor(q, c) * trapezoid_nonuniform(&trace.times, &integrand))
}

/// Ensemble mean of `|a(x)|²` per time, from positions per time.
pub fn newtonian_integrand(samples: &[Vec<f64>], accel: &VectorField) -> Result<f64> {
    if samples.is_empty() {
        return invalid("empty sample set");
    }
    let d = accel.grid().dim();
    let mut acc = 0.0;
    for x in samples {
        let a = accel
            .sample(x)
            .ok_or_else(|| Error::InvalidInput(format!("sample {x:?} lies outside the grid")))?;
        acc += a[..d].iter().map(|x| x * x).sum::<f64>();
    }
    Ok(acc / samples.len() as f64)
}

/// `(2q²/3c³) ∫ E_samples[|a(x)|²] dt`.
pub fn newtonian_ensemble(
    times: &[f64],
    samples: &[Vec<Vec<f64>>],
    v: &ScalarField,
    mass: f64,
    q: f64,
    c: f64,
) -> Result<f64> {
    check_times(times)?;
    if samples.len() != times.len() {
        return invalid("one sample set per time is required");
    }
    let accel = acceleration_field(v, mass);
    let integrand = samples
        .iter()
        .map(|s| newtonian_integrand(s, &accel))
        .collect::<Result<Vec<f64>>>()?;
    Ok(larmor_prefactor(q, c) * trapezoid_nonuniform(times, &integrand))
}

pub const STOCHASTIC_NOTE: &str =
    "stochastic-mechanics paths are nowhere differentiable, so the acceleration and its square are unbounded";

/// The stochastic-mechanics entry: always divergent.
pub fn stochastic_mechanics() -> (Energy, &'static str) {
    (Energy::Divergent, STOCHASTIC_NOTE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BremsstrahlungReport {
    pub classical: Energy,
    pub hydrodynamic: Energy,
    pub qed: Energy,
    pub bohmian: Energy,
    pub newtonian: Energy,
    pub stochastic: Energy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BremsstrahlungReport {
    pub fn entries(&self) -> [(&'static str, Energy); 6] {
        [
            ("classical", self.classical),
            ("hydrodynamic", self.hydrodynamic),
            ("qed", self.qed),
            ("bohmian", self.bohmian),
            ("newtonian", self.newtonian),
            ("stochastic", self.stochastic),
        ]
    }
}

/// All six functionals on one trace. Without an ensemble in the trace the
/// Newtonian entry uses the classical trajectory as a one-point ensemble.
pub fn report(trace: &EvolutionTrace, v: &ScalarField, consts: &PhysicalConstants) -> Result<BremsstrahlungReport> {
    trace.validate()?;
    let (q, c) = (consts.charge, consts.light_speed);
    let mut notes = vec![STOCHASTIC_NOTE.to_string()];
    let newtonian = match &trace.ensemble {
        Some(e) => newtonian_ensemble(&trace.times, e, v, consts.mass, q, c)?,
        None => {
            notes.push("no ensemble in the trace; the Newtonian entry uses the single classical trajectory".into());
            classical(&trace.times, &trace.classical_acceleration, q, c)?
        }
    };
    Ok(BremsstrahlungReport {
        classical: Energy::Finite(classical(&trace.times, &trace.classical_acceleration, q, c)?),
        hydrodynamic: Energy::Finite(hydrodynamic(trace, q, c)?),
        qed: Energy::Finite(qed(trace, q, c)?),
        bohmian: Energy::Finite(bohmian(trace, v, q, c, consts.hbar, consts.mass)?),
        newtonian: Energy::Finite(newtonian),
        stochastic: stochastic_mechanics().0,
        notes,
    })
}

/// Long-format CSV `time,model,integrand` for the five finite models.
pub fn write_integrands_csv<W: Write>(trace: &EvolutionTrace, v: &ScalarField, consts: &PhysicalConstants, mut w: W) -> Result<()> {
    trace.validate()?;
    let accel = acceleration_field(v, consts.mass);
    writeln!(w, "time,model,integrand")?;
    for (k, t) in trace.times.iter().enumerate() {
        let classical: f64 = trace.classical_acceleration[k].iter().map(|x| x * x).sum();
        let hydro: f64 = trace.mean_acceleration[k].iter().map(|x| x * x).sum();
        let bohm = bohmian_integrand(&trace.densities[k], &accel, consts.hbar, consts.mass)?;
        let newton = match &trace.ensemble {
            Some(e) => newtonian_integrand(&e[k], &accel)?,
            None => classical,
        };
        for (name, val) in [
            ("classical", classical),
            ("hydrodynamic", hydro),
            ("qed", trace.mean_square_acceleration[k]),
            ("bohmian", bohm),
            ("newtonian", newton),
        ] {
            writeln!(w, "{t:e},{name},{val:e}")?;
        }
    }
    Ok(())
}

/// Grid helper shared by tests and experiments: a 1D grid on `[-l, l]`.
pub fn symmetric_line(l: f64, n: usize) -> Result<Grid> {
    Grid::new(vec![crate::fields::Axis::new(-l, l, n)])
}
