use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kolmogorov::Generator;
use super::sde::integrate_path;
use super::MarkovModel;
use crate::error::{invalid, Error, Result};
use crate::fields::{gradient, Boundary, ScalarField, VectorField};
use crate::quadrature::gauss_laguerre;
use crate::rng::stream_rng;
use crate::stats::MeanEstimate;

/// Truncation of the `s` integral; `e^{-30}` is below `1e-13`.
pub const S_MAX: f64 = 30.0;
/// Gauss–Laguerre order of the kernel route.
pub const KERNEL_NODES: usize = 24;

fn potential_gradient(v: &ScalarField) -> VectorField {
    if v.boundary() == Boundary::Periodic {
        gradient(v)
    } else {
        gradient(&v.clone().with_boundary(Boundary::Open))
    }
}

fn check_point(model: &MarkovModel, v: &ScalarField, x: &[f64]) -> Result<()> {
    if v.grid().dim() != model.dim || x.len() != model.dim {
        return invalid("potential, model and evaluation point must share a dimension");
    }
    if x.iter().any(|c| !c.is_finite()) {
        return invalid("evaluation point must be finite");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McForceOptions {
    pub paths: usize,
    pub seed: u64,
    /// Euler–Maruyama step; `None` means `τ/100`.
    pub dt: Option<f64>,
}

impl McForceOptions {
    pub fn new(paths: usize, seed: u64) -> Self {
        McForceOptions { paths, seed, dt: None }
    }
}

/// Monte Carlo estimate of the force expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McForce {
    /// Per component mean and standard error.
    pub components: Vec<MeanEstimate>,
    /// Paths that left the grid before `s = S_MAX` and were dropped.
    pub discarded: usize,
    pub warnings: Vec<String>,
}

impl McForce {
    pub fn mean(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.mean).collect()
    }

    /// Largest per-component deviation from `target` in standard errors.
    pub fn max_z(&self, target: &[f64]) -> f64 {
        self.components.iter().zip(target).map(|(c, t)| c.z_score(*t)).fold(0.0, f64::max)
    }
}

/// `−E[∫₀^∞ e^{-s} ∇V(x(τs)) ds]` with `x(0) = x`, from Euler–Maruyama paths.
/// Along each path the `s` integral is a trapezoid rule on the step grid up
/// to `S_MAX`, with weights normalised to sum to one.
pub fn force_expectation_mc(
    model: &MarkovModel,
    v: &ScalarField,
    tau: f64,
    x: &[f64],
    options: &McForceOptions,
) -> Result<McForce> {
    check_point(model, v, x)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return invalid("τ must be positive");
    }
    if options.paths == 0 {
        return invalid("at least one path is required");
    }
    let dt = options.dt.unwrap_or(tau / 100.0);
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid("time step must be positive");
    }
    let grad = potential_gradient(v);
    let d = model.dim;
    let ds = dt / tau;
    let steps = (S_MAX / ds).ceil() as usize;
    let mut weights: Vec<f64> = (0..=steps)
        .map(|k| {
            let end = if k == 0 || k == steps { 0.5 } else { 1.0 };
            end * (-(k as f64) * ds).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let per_path: Vec<Option<[f64; 3]>> = (0..options.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(options.seed, i as u64);
            let mut pos = [0.0; 3];
            pos[..d].copy_from_slice(x);
            let mut acc = [0.0; 3];
            let mut inside = true;
            integrate_path(model, &mut pos[..d], dt, steps, &mut rng, |step, y| match grad.sample(y) {
                Some(g) => {
                    for k in 0..d {
                        acc[k] += weights[step] * g[k];
                    }
                    true
                }
                None => {
                    inside = false;
                    false
                }
            })
            .map_err(|(step, reason)| Error::Simulation { path: i, step, reason })?;
            Ok(inside.then(|| acc.map(|a| -a)))
        })
        .collect::<Result<_>>()?;

    let kept: Vec<[f64; 3]> = per_path.iter().flatten().copied().collect();
    let discarded = options.paths - kept.len();
    let mut warnings = Vec::new();
    if discarded * 100 > options.paths {
        warnings.push(format!("{discarded} of {} paths left the grid and were discarded", options.paths));
    }
    let components = (0..d)
        .map(|k| MeanEstimate::from_samples(&kept.iter().map(|f| f[k]).collect::<Vec<_>>()))
        .collect();
    Ok(McForce {
        components,
        discarded,
        warnings,
    })
}

/// Kernel-route result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelForce {
    pub force: Vec<f64>,
    /// Laguerre nodes at or below `S_MAX` that entered the sum.
    pub nodes_used: usize,
    pub steps: usize,
}

/// `−∫₀^∞ e^{-s} ∫ ∇V(y) P_{τs}(y, x) dy ds` with grid transition kernels on
/// the potential's grid. Laguerre nodes beyond `S_MAX` are dropped and the
/// remaining weights renormalised, so a constant gradient is reproduced
/// exactly. `τ = 0` returns `−∇V(x)`.
pub fn force_expectation_kernel(model: &MarkovModel, v: &ScalarField, tau: f64, x: &[f64]) -> Result<KernelForce> {
    check_point(model, v, x)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return invalid("τ must be finite and >= 0");
    }
    let grad = potential_gradient(v);
    let d = model.dim;
    if tau == 0.0 {
        let g = grad
            .sample(x)
            .ok_or_else(|| Error::InvalidInput(format!("point {x:?} lies outside the grid")))?;
        return Ok(KernelForce {
            force: g[..d].iter().map(|c| -c).collect(),
            nodes_used: 0,
            steps: 0,
        });
    }
    let gen = Generator::new(model, v.grid(), v.boundary())?;
    let (nodes, weights) = gauss_laguerre(KERNEL_NODES);
    let used: Vec<(f64, f64)> = nodes.into_iter().zip(weights).filter(|(s, _)| *s <= S_MAX).collect();
    let wsum: f64 = used.iter().map(|(_, w)| w).sum();
    let times: Vec<f64> = used.iter().map(|(s, _)| tau * s).collect();
    let cw = gen.weights().to_vec();
    let mut acc = [0.0; 3];
    let stats = gen.evolve_forward(gen.point_source(x)?, &times, |c, p| {
        let w = used[c].1 / wsum;
        for k in 0..d {
            let e: f64 = p.iter().zip(&cw).zip(grad.component(k)).map(|((p, w), g)| p * w * g).sum();
            acc[k] += w * e;
        }
    })?;
    Ok(KernelForce {
        force: acc[..d].iter().map(|a| -a).collect(),
        nodes_used: used.len(),
        steps: stats.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Axis, Grid};

    fn line(l: f64, n: usize) -> Grid {
        Grid::new(vec![Axis::new(-l, l, n)]).unwrap()
    }

    fn harmonic(g: &Grid, k: f64) -> ScalarField {
        ScalarField::from_fn(g.clone(), Boundary::Dirichlet, |x| 0.5 * k * x[0] * x[0]).unwrap()
    }

    #[test]
    fn linear_potential_is_reproduced_exactly() {
        let g = Grid::uniform(2, -5.0, 5.0, 41).unwrap();
        let v = ScalarField::from_fn(g.clone(), Boundary::Dirichlet, |x| 0.3 * x[0] - 1.2 * x[1]).unwrap();
        let model = MarkovModel::ornstein_uhlenbeck(1.0, 0.2, 2).unwrap();
        let k = force_expectation_kernel(&model, &v, 0.5, &[0.4, -0.3]).unwrap();
        assert!((k.force[0] + 0.3).abs() < 1e-12 && (k.force[1] - 1.2).abs() < 1e-12, "{:?}", k.force);
        let mc = force_expectation_mc(&model, &v, 0.5, &[0.4, -0.3], &McForceOptions::new(200, 5)).unwrap();
        assert!((mc.components[0].mean + 0.3).abs() < 1e-12);
        assert!((mc.components[1].mean - 1.2).abs() < 1e-12);
        assert!(mc.components.iter().all(|c| c.stderr < 1e-13));
    }

    #[test]
    fn kernel_route_matches_ou_closed_form() {
        let (gamma, nu, tau, k) = (0.8, 0.5, 0.7, 1.3);
        let g = line(8.0, 321);
        let v = harmonic(&g, k);
        let model = MarkovModel::ornstein_uhlenbeck(gamma, nu, 1).unwrap();
        for x in [-1.5, 0.7, 2.0] {
            let f = force_expectation_kernel(&model, &v, tau, &[x]).unwrap();
            let exact = -k * x / (1.0 + gamma * tau);
            assert!(((f.force[0] - exact) / exact).abs() < 1e-2, "x = {x}: {} vs {exact}", f.force[0]);
            assert!(f.nodes_used < KERNEL_NODES && f.nodes_used > 10);
        }
    }

    #[test]
    fn mc_route_matches_ou_closed_form() {
        let (gamma, nu, tau, k) = (0.8, 0.5, 0.7, 1.3);
        let g = line(8.0, 161);
        let v = harmonic(&g, k);
        let model = MarkovModel::ornstein_uhlenbeck(gamma, nu, 1).unwrap();
        let x = 1.2;
        let mc = force_expectation_mc(&model, &v, tau, &[x], &McForceOptions::new(20_000, 17)).unwrap();
        let exact = -k * x / (1.0 + gamma * tau);
        assert!(mc.max_z(&[exact]) < 4.0, "{:?} vs {exact}", mc.components);
        assert_eq!(mc.discarded, 0);
    }

    #[test]
    fn small_tau_gives_the_instantaneous_force() {
        let g = line(6.0, 601);
        let v = ScalarField::from_fn(g.clone(), Boundary::Dirichlet, |x| x[0].powi(4) / 4.0).unwrap();
        let model = MarkovModel::brownian(0.3, 1).unwrap();
        let x = 0.9;
        let f0 = force_expectation_kernel(&model, &v, 0.0, &[x]).unwrap();
        assert!((f0.force[0] + x * x * x).abs() < 1e-3);
        let opts = McForceOptions { dt: Some(1e-5), ..McForceOptions::new(2000, 1) };
        let mc = force_expectation_mc(&model, &v, 1e-4, &[x], &opts).unwrap();
        assert!(mc.max_z(&f0.force) < 4.0 || (mc.mean()[0] - f0.force[0]).abs() < 1e-3, "{:?}", mc.components);
    }

    #[test]
    fn kernel_route_is_linear_in_the_potential() {
        let g = line(5.0, 101);
        let v1 = harmonic(&g, 1.0);
        let v2 = ScalarField::from_fn(g.clone(), Boundary::Dirichlet, |x| x[0].sin()).unwrap();
        let v12 = v1.zip_map(&v2, |a, b| 2.0 * a - 0.5 * b).unwrap();
        let model = MarkovModel::ornstein_uhlenbeck(1.0, 0.3, 1).unwrap();
        let f = |v: &ScalarField| force_expectation_kernel(&model, v, 0.4, &[0.6]).unwrap().force[0];
        let lhs = f(&v12);
        let rhs = 2.0 * f(&v1) - 0.5 * f(&v2);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn escaping_paths_are_counted_and_warned() {
        let g = line(1.0, 21);
        let v = harmonic(&g, 1.0);
        let model = MarkovModel::brownian(1.0, 1).unwrap();
        let mc = force_expectation_mc(&model, &v, 1.0, &[0.0], &McForceOptions::new(100, 2)).unwrap();
        assert!(mc.discarded > 1);
        assert_eq!(mc.warnings.len(), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = line(1.0, 21);
        let v = harmonic(&g, 1.0);
        let model = MarkovModel::brownian(1.0, 1).unwrap();
        assert!(force_expectation_mc(&model, &v, 0.0, &[0.0], &McForceOptions::new(10, 0)).is_err());
        assert!(force_expectation_mc(&model, &v, 1.0, &[0.0, 0.0], &McForceOptions::new(10, 0)).is_err());
        assert!(force_expectation_kernel(&model, &v, -1.0, &[0.0]).is_err());
        assert!(force_expectation_kernel(&model, &v, 1.0, &[3.0]).is_err());
    }
}
