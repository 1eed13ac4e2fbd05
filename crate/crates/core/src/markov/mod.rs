//! Stationary Markov diffusions: Euler–Maruyama ensembles, Kolmogorov grid
//! solvers, and the pre-acceleration force expectation by two routes.
//!
//! Diffusion convention: `E[dW_i dW_j] = 2 ν δ_ij dt`. A zero-drift path has
//! per-axis variance `2νt`, and the forward equation is
//! `∂P/∂t + ∇·(bP) − νΔP = 0`.

mod closure;
mod force;
mod kolmogorov;
mod sde;

pub use closure::{gibbs_closure, ClosureOptions, ClosurePoint, ClosureReport};
pub use force::{force_expectation_kernel, force_expectation_mc, KernelForce, McForce, McForceOptions, KERNEL_NODES, S_MAX};
pub use kolmogorov::{kolmogorov_backward, kolmogorov_forward, Generator, KolmogorovSolution, RunStats, TransitionDensity};
pub use sde::{simulate, InitialCondition, SimulationOptions, TrajectoryEnsemble};

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fields::{gradient, Boundary, Grid, ScalarField, VectorField};

pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum Drift {
    Zero,
    /// `b(x) = −rate (x − center)`, the Ornstein–Uhlenbeck drift.
    Linear { rate: f64, center: [f64; 3] },
    /// `b = ν ∇ln ρ`, the zero-current drift of a stationary density.
    LogDensityGradient {
        ln_density: ScalarField,
        gradient: VectorField,
        nu: f64,
    },
    Custom(DriftFn),
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => write!(f, "Zero"),
            Drift::Linear { rate, center } => write!(f, "Linear {{ rate: {rate}, center: {center:?} }}"),
            Drift::LogDensityGradient { nu, .. } => write!(f, "LogDensityGradient {{ nu: {nu}, .. }}"),
            Drift::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarkovModel {
    pub drift: Drift,
    /// ν (cm²/s).
    pub nu: f64,
    pub dim: usize,
}

impl MarkovModel {
    pub fn new(drift: Drift, nu: f64, dim: usize) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return invalid("diffusion ν must be finite and >= 0");
        }
        if !(1..=3).contains(&dim) {
            return invalid("dimension must be 1, 2 or 3");
        }
        if let Drift::LogDensityGradient { ln_density, .. } = &drift {
            if ln_density.grid().dim() != dim {
                return invalid("log-density grid dimension differs from the model dimension");
            }
        }
        if let Drift::Linear { rate, .. } = drift {
            if !rate.is_finite() {
                return invalid("OU rate must be finite");
            }
        }
        Ok(MarkovModel { drift, nu, dim })
    }

    pub fn brownian(nu: f64, dim: usize) -> Result<Self> {
        MarkovModel::new(Drift::Zero, nu, dim)
    }

    pub fn ornstein_uhlenbeck(rate: f64, nu: f64, dim: usize) -> Result<Self> {
        MarkovModel::new(Drift::Linear { rate, center: [0.0; 3] }, nu, dim)
    }

    pub fn is_drift_free(&self) -> bool {
        matches!(self.drift, Drift::Zero)
    }

    /// Drift at `x`; non-finite entries signal a point where it is undefined.
    pub fn drift_at(&self, x: &[f64], out: &mut [f64]) {
        match &self.drift {
            Drift::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Drift::Linear { rate, center } => {
                for k in 0..self.dim {
                    out[k] = -rate * (x[k] - center[k]);
                }
            }
            Drift::LogDensityGradient { gradient, nu, .. } => match gradient.sample(x) {
                Some(g) => {
                    for k in 0..self.dim {
                        out[k] = nu * g[k];
                    }
                }
                None => out.iter_mut().for_each(|v| *v = f64::NAN),
            },
            Drift::Custom(f) => f(x, out),
        }
    }

    /// Drift component along `axis` on the face between grid nodes `i` and
    /// `j = i + stride(axis)`. The log-density drift uses the exact difference
    /// quotient of ln ρ, which makes ρ a discrete stationary state.
    pub(crate) fn face_velocity(&self, grid: &Grid, axis: usize, i: usize, j: usize) -> f64 {
        let h = grid.spacing(axis);
        if let Drift::LogDensityGradient { ln_density, nu, .. } = &self.drift {
            let d = grid.dim();
            if ln_density.grid() == grid {
                let l = ln_density.values();
                return nu * (l[j] - l[i]) / h;
            }
            let xi = grid.coords(i);
            let xj = grid.coords(j);
            if let (Some(a), Some(b)) = (ln_density.sample(&xi[..d]), ln_density.sample(&xj[..d])) {
                return nu * (b - a) / h;
            }
            return f64::NAN;
        }
        // Across a periodic seam the face still sits half a spacing past node i.
        let mut mid = grid.coords(i);
        mid[axis] += 0.5 * h;
        let mut b = [0.0; 3];
        self.drift_at(&mid[..self.dim], &mut b[..self.dim]);
        b[axis]
    }
}

/// The model with drift `ν∇ln ρ`, whose forward equation leaves ρ invariant
/// (zero probability current).
pub fn stationary_drift(density: &ScalarField, nu: f64) -> Result<MarkovModel> {
    if let Some(i) = density.values().iter().position(|&r| r <= 0.0) {
        return invalid(format!("density must be positive; node {i} is not"));
    }
    let ln_density = density.map(f64::ln).with_boundary(Boundary::Open);
    let grad = gradient(&ln_density);
    let dim = density.grid().dim();
    MarkovModel::new(
        Drift::LogDensityGradient {
            ln_density,
            gradient: grad,
            nu,
        },
        nu,
        dim,
    )
}
