//! Wiener-process checks on simulated zero-drift paths: the covariance
//! kernel `2ν min(t₁, t₂)`, its one-sided slopes at the diagonal, and the
//! box-counting dimension of spatial traces.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markov::{simulate, InitialCondition, MarkovModel, SimulationOptions, TrajectoryEnsemble};
use crate::rng::stream_rng;
use crate::stats::{linear_fit, MeanEstimate};

/// Shortest path accepted by [`fractal_dimension`], in steps.
pub const MIN_PATH_STEPS: usize = 100_000;
/// Box sizes per decade on the counting ladder.
pub const LADDER_PER_DECADE: usize = 8;
/// Narrowest fit window accepted, in decades of box size.
pub const MIN_FIT_DECADES: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub t1: f64,
    pub t2: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl CovarianceEstimate {
    pub fn z_score(&self, target: f64) -> f64 {
        MeanEstimate {
            mean: self.estimate,
            stderr: self.stderr,
            samples: self.samples,
        }
        .z_score(target)
    }
}

fn record_index(ens: &TrajectoryEnsemble, t: f64) -> Result<usize> {
    if !(t >= 0.0 && t <= ens.horizon * (1.0 + 1e-12)) {
        return invalid(format!("time {t} lies outside the ensemble horizon [0, {}]", ens.horizon));
    }
    let step = (t / ens.dt).round();
    if (step * ens.dt - t).abs() > 1e-9 * ens.dt.max(t) {
        return invalid(format!("time {t} is not a multiple of the step {}", ens.dt));
    }
    ens.record_at_step(step as usize)
        .ok_or_else(|| Error::InvalidInput(format!("time {t} was not recorded (record stride too coarse)")))
}

/// Displacement `w(t) = x(t) − x(0)` of one path, all axes.
fn displacement(ens: &TrajectoryEnsemble, path: usize, record: usize) -> impl Iterator<Item = f64> + '_ {
    ens.position(path, record)
        .iter()
        .zip(ens.position(path, 0))
        .map(|(x, x0)| x - x0)
}

/// Per-path products `(1/d) Σ_k w_k(t₁) w_k(t₂)`; every axis is an
/// independent copy of the same process.
fn products(ens: &TrajectoryEnsemble, r1: usize, r2: usize) -> Vec<f64> {
    let d = ens.dim as f64;
    (0..ens.paths())
        .map(|p| displacement(ens, p, r1).zip(displacement(ens, p, r2)).map(|(a, b)| a * b).sum::<f64>() / d)
        .collect()
}

/// Sample estimate of `E[w(t₁) w(t₂)]` from a zero-drift ensemble. The mean
/// of `w` is known to be zero, so products are averaged without centring.
pub fn covariance(ens: &TrajectoryEnsemble, t1: f64, t2: f64) -> Result<CovarianceEstimate> {
    let (r1, r2) = (record_index(ens, t1)?, record_index(ens, t2)?);
    let est = MeanEstimate::from_samples(&products(ens, r1, r2));
    Ok(CovarianceEstimate {
        t1,
        t2,
        estimate: est.mean,
        stderr: est.stderr,
        samples: est.samples,
    })
}

/// Every ordered pair of `times`, row-major in `t1`.
pub fn covariance_grid(ens: &TrajectoryEnsemble, times: &[f64]) -> Result<Vec<CovarianceEstimate>> {
    let mut out = Vec::with_capacity(times.len() * times.len());
    for &t1 in times {
        for &t2 in times {
            out.push(covariance(ens, t1, t2)?);
        }
    }
    Ok(out)
}

pub fn write_covariance_csv<W: Write>(estimates: &[CovarianceEstimate], mut w: W) -> Result<()> {
    writeln!(w, "t1,t2,estimate,stderr,n")?;
    for e in estimates {
        writeln!(w, "{:e},{:e},{:e},{:e},{}", e.t1, e.t2, e.estimate, e.stderr, e.samples)?;
    }
    Ok(())
}

/// Finite-difference slopes of `t₁ ↦ E[w(t₁) w(t₂)]` on either side of `t₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneSidedSlopes {
    pub t2: f64,
    pub spacing: f64,
    pub left: MeanEstimate,
    pub right: MeanEstimate,
}

/// Slopes from the recorded times adjacent to `t₂`. Each slope is the mean
/// of per-path difference quotients, so its standard error already includes
/// the correlation between the two covariance entries it differences.
/// The neighbours must lie within `t₂/2` so the left quotient stays on the
/// branch `t₁ < t₂` well clear of the origin.
pub fn one_sided_derivative(ens: &TrajectoryEnsemble, t2: f64) -> Result<OneSidedSlopes> {
    let r2 = record_index(ens, t2)?;
    if r2 == 0 || r2 + 1 >= ens.recorded_steps.len() {
        return invalid(format!("t₂ = {t2} needs a recorded time on each side"));
    }
    let steps = &ens.recorded_steps;
    let left_gap = (steps[r2] - steps[r2 - 1]) as f64 * ens.dt;
    let right_gap = (steps[r2 + 1] - steps[r2]) as f64 * ens.dt;
    let required = 0.5 * t2;
    if left_gap > required || right_gap > required {
        return invalid(format!(
            "t₁ sampling around t₂ = {t2} has spacing {:.4e}; need spacing <= {required:.4e}",
            left_gap.max(right_gap)
        ));
    }
    let at = products(ens, r2, r2);
    let below = products(ens, r2 - 1, r2);
    let above = products(ens, r2 + 1, r2);
    let left: Vec<f64> = at.iter().zip(&below).map(|(a, b)| (a - b) / left_gap).collect();
    let right: Vec<f64> = above.iter().zip(&at).map(|(a, b)| (a - b) / right_gap).collect();
    Ok(OneSidedSlopes {
        t2,
        spacing: left_gap.max(right_gap),
        left: MeanEstimate::from_samples(&left),
        right: MeanEstimate::from_samples(&right),
    })
}

/// One zero-drift path from the origin, `steps` steps of `dt`, flattened
/// point-major.
pub fn brownian_path(dim: usize, nu: f64, dt: f64, steps: usize, seed: u64) -> Result<Vec<f64>> {
    let model = MarkovModel::brownian(nu, dim)?;
    let opts = SimulationOptions::new(steps as f64 * dt, dt, 1, seed);
    let mut ens = simulate(&model, &InitialCondition::Point(vec![0.0; dim]), &opts)?;
    Ok(ens.positions.swap_remove(0))
}

/// Halves the step of a zero-drift path by inserting Brownian-bridge
/// midpoints, keeping every original point. Midpoint noise per axis has
/// variance `ν dt / 2`.
pub fn refine_path(path: &[f64], dim: usize, nu: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    if dim == 0 || !path.len().is_multiple_of(dim) || path.len() < 2 * dim {
        return invalid("path must hold at least two points of the given dimension");
    }
    let mut rng = stream_rng(seed, 0);
    let sd = (0.5 * nu * dt).sqrt();
    let n = path.len() / dim;
    let mut out = Vec::with_capacity((2 * n - 1) * dim);
    for i in 0..n - 1 {
        let (a, b) = (&path[i * dim..(i + 1) * dim], &path[(i + 1) * dim..(i + 2) * dim]);
        out.extend_from_slice(a);
        for k in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            out.push(0.5 * (a[k] + b[k]) + sd * z);
        }
    }
    out.extend_from_slice(&path[(n - 1) * dim..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalDimension {
    pub dimension: f64,
    pub slope_stderr: f64,
    pub fit_residual: f64,
    pub box_sizes: Vec<f64>,
    pub counts: Vec<usize>,
    /// Inclusive range of `box_sizes` used in the fit.
    pub fit_range: (usize, usize),
    pub step_length: f64,
    pub extent: f64,
    pub ladder_decades: f64,
    pub fit_decades: f64,
}

fn occupied_boxes(path: &[f64], dim: usize, origin: &[f64], size: f64) -> usize {
    let mut keys: Vec<[i64; 3]> = path
        .chunks_exact(dim)
        .map(|p| {
            let mut k = [0i64; 3];
            for a in 0..dim {
                k[a] = ((p[a] - origin[a]) / size).floor() as i64;
            }
            k
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Box-counting dimension of a spatial trace. Boxes run on a geometric
/// ladder from a tenth of the mean step up to the path extent; the slope of
/// `ln N(ε)` against `ln(1/ε)` is fitted for `10·step ≤ ε ≤ extent/10`.
pub fn fractal_dimension(path: &[f64], dim: usize) -> Result<FractalDimension> {
    if !(2..=3).contains(&dim) {
        return invalid("box counting needs a spatial trace in two or three dimensions");
    }
    if !path.len().is_multiple_of(dim) {
        return invalid("path length is not a whole number of points");
    }
    let n = path.len() / dim;
    if n < MIN_PATH_STEPS + 1 {
        return invalid(format!("path has {} steps; at least {MIN_PATH_STEPS} are needed", n.saturating_sub(1)));
    }
    let step_length = path
        .chunks_exact(dim)
        .zip(path.chunks_exact(dim).skip(1))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
        .sum::<f64>()
        / (n - 1) as f64;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in path.chunks_exact(dim) {
        for a in 0..dim {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (0..dim).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if !(step_length > 0.0 && extent.is_finite()) {
        return invalid("path must move and stay finite");
    }
    let smallest = 0.1 * step_length;
    let ladder_decades = (extent / smallest).log10();
    if ladder_decades < 3.0 {
        return Err(Error::Diagnostic(format!(
            "insufficient scaling range: the box ladder spans {ladder_decades:.2} decades, at least 3 are needed"
        )));
    }
    let rungs = (ladder_decades * LADDER_PER_DECADE as f64).floor() as usize + 1;
    let box_sizes: Vec<f64> = (0..rungs)
        .map(|k| smallest * 10f64.powf(k as f64 / LADDER_PER_DECADE as f64))
        .collect();
    let counts: Vec<usize> = box_sizes.par_iter().map(|&s| occupied_boxes(path, dim, &lo[..dim], s)).collect();

    let (wlo, whi) = (10.0 * step_length, extent / 10.0);
    let inside: Vec<usize> = (0..rungs).filter(|&k| box_sizes[k] >= wlo && box_sizes[k] <= whi).collect();
    let fit_decades = match (inside.first(), inside.last()) {
        (Some(&a), Some(&b)) => (box_sizes[b] / box_sizes[a]).log10(),
        _ => 0.0,
    };
    if inside.len() < 3 || fit_decades < MIN_FIT_DECADES {
        return Err(Error::Diagnostic(format!(
            "insufficient scaling range: the fit window [{wlo:.3e}, {whi:.3e}] holds {fit_decades:.2} decades, \
             at least {MIN_FIT_DECADES} are needed; use a longer path"
        )));
    }
    let x: Vec<f64> = inside.iter().map(|&k| -box_sizes[k].ln()).collect();
    let y: Vec<f64> = inside.iter().map(|&k| (counts[k] as f64).ln()).collect();
    let fit = linear_fit(&x, &y).ok_or_else(|| Error::Diagnostic("degenerate box-count fit".into()))?;
    Ok(FractalDimension {
        dimension: fit.slope,
        slope_stderr: fit.slope_stderr,
        fit_residual: fit.rms_residual,
        box_sizes,
        counts,
        fit_range: (inside[0], *inside.last().unwrap()),
        step_length,
        extent,
        ladder_decades,
        fit_decades,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble(nu: f64, paths: usize, seed: u64) -> TrajectoryEnsemble {
        let m = MarkovModel::brownian(nu, 1).unwrap();
        let opts = SimulationOptions::new(2.0, 0.01, paths, seed).with_record_stride(10);
        simulate(&m, &InitialCondition::Point(vec![0.0]), &opts).unwrap()
    }

    #[test]
    fn diagonal_matches_the_kernel() {
        let nu = 0.4;
        let ens = ensemble(nu, 40_000, 5);
        for t in [0.5, 1.0, 2.0] {
            let c = covariance(&ens, t, t).unwrap();
            assert!(c.z_score(2.0 * nu * t) < 4.0, "{c:?}");
            assert!(c.stderr > 0.0);
        }
        let zero = covariance(&ens, 0.0, 1.3).unwrap();
        assert_eq!(zero.estimate, 0.0);
        assert_eq!(covariance(&ens, 1.0, 2.0).unwrap().estimate, covariance(&ens, 2.0, 1.0).unwrap().estimate);
    }

    #[test]
    fn times_off_the_record_are_rejected() {
        let ens = ensemble(1.0, 10, 0);
        assert!(covariance(&ens, 2.5, 1.0).is_err());
        assert!(covariance(&ens, -0.1, 1.0).is_err());
        assert!(covariance(&ens, 0.05, 1.0).is_err());
    }

    #[test]
    fn disjoint_increments_are_uncorrelated() {
        let ens = ensemble(0.7, 40_000, 8);
        let (r0, r1, r2, r3) = (0, 5, 10, 20);
        let inc = |p: usize, a: usize, b: usize| ens.position(p, b)[0] - ens.position(p, a)[0];
        let prod: Vec<f64> = (0..ens.paths()).map(|p| inc(p, r0, r1) * inc(p, r2, r3)).collect();
        let est = MeanEstimate::from_samples(&prod);
        assert!(est.z_score(0.0) < 4.0, "{est:?}");
    }

    #[test]
    fn slopes_jump_at_the_diagonal_and_scale_with_nu() {
        let a = one_sided_derivative(&ensemble(0.5, 40_000, 2), 1.0).unwrap();
        assert!(a.left.z_score(1.0) < 4.0, "{a:?}");
        assert!(a.right.z_score(0.0) < 4.0, "{a:?}");
        let b = one_sided_derivative(&ensemble(1.0, 40_000, 2), 1.0).unwrap();
        assert!((b.left.mean / a.left.mean - 2.0).abs() < 1e-9);
        assert!((b.right.mean / a.right.mean - 2.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_sampling_names_the_needed_spacing() {
        let m = MarkovModel::brownian(1.0, 1).unwrap();
        let opts = SimulationOptions::new(2.0, 0.01, 10, 0).with_record_stride(50);
        let ens = simulate(&m, &InitialCondition::Point(vec![0.0]), &opts).unwrap();
        let msg = one_sided_derivative(&ens, 0.5).unwrap_err().to_string();
        assert!(msg.contains("need spacing <= 2.5000e-1"), "{msg}");
        assert!(one_sided_derivative(&ens, 2.0).is_err());
    }

    #[test]
    fn straight_line_has_dimension_one() {
        let n = MIN_PATH_STEPS + 1;
        let path: Vec<f64> = (0..n).flat_map(|i| [i as f64 * 0.6, i as f64 * 0.8]).collect();
        let fd = fractal_dimension(&path, 2).unwrap();
        assert!((fd.dimension - 1.0).abs() < 0.05, "{fd:?}");
        assert!(fd.ladder_decades >= 3.0);
    }

    #[test]
    fn short_or_one_dimensional_paths_are_rejected() {
        assert!(fractal_dimension(&vec![0.0; 1000], 2).is_err());
        assert!(fractal_dimension(&vec![0.0; 200_002], 1).is_err());
        // Long but confined: the path hops between two points.
        let hop: Vec<f64> = (0..=MIN_PATH_STEPS).flat_map(|i| [(i % 2) as f64, 0.0]).collect();
        assert!(matches!(fractal_dimension(&hop, 2), Err(Error::Diagnostic(_))));
    }

    #[test]
    fn bridge_refinement_keeps_the_coarse_points() {
        let path = brownian_path(2, 0.5, 0.1, 1000, 4).unwrap();
        let fine = refine_path(&path, 2, 0.5, 0.1, 9).unwrap();
        assert_eq!(fine.len(), (2 * 1001 - 1) * 2);
        for i in 0..1001 {
            assert_eq!(&fine[4 * i..4 * i + 2], &path[2 * i..2 * i + 2]);
        }
        // Fine increments have variance 2ν(dt/2) per axis.
        let incs: Vec<f64> = fine.chunks_exact(2).zip(fine.chunks_exact(2).skip(1)).map(|(a, b)| (b[0] - a[0]).powi(2)).collect();
        let est = MeanEstimate::from_samples(&incs);
        assert!(est.z_score(0.5 * 0.1) < 4.0, "{est:?}");
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let ens = ensemble(1.0, 100, 3);
        let grid = covariance_grid(&ens, &[0.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_covariance_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t1,t2,estimate,stderr,n\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
