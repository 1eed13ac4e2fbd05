use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fields::{Boundary, Grid, MomentumSpectrum};
use crate::qevolve::WaveFunction;

/// Spectrum magnitude, relative to the peak, allowed on the outermost
/// momentum shell of the grid.
pub const NYQUIST_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PacketSpec {
    pub mass: f64,
    pub charge: f64,
    pub hbar: f64,
    pub light_speed: f64,
    /// Support margin: the spectrum vanishes for `|p| > (1 − ε) m c`.
    pub epsilon: f64,
    /// Position-space width `w` of the envelope `exp(−|p − p₀|² w² / 2ħ²)`.
    pub width: f64,
    pub momentum: Vec<f64>,
}

/// `exp(1 − 1/(1 − s²))` on `|s| < 1`, zero outside. Smooth with compact support.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Free packet whose momentum spectrum is exactly zero beyond
/// `p_max = (1 − ε) m c`: a radial bump of radius `p_max` times a Gaussian
/// envelope of width `ħ/w` about `p₀`, transformed to position space and
/// normalised.
pub fn build_compact_packet(grid: &Grid, boundary: Boundary, spec: &PacketSpec) -> Result<(WaveFunction, MomentumSpectrum)> {
    let d = grid.dim();
    if !(spec.epsilon > 0.0 && spec.epsilon < 1.0) {
        return invalid("ε must lie in (0, 1)");
    }
    if !(spec.width > 0.0 && spec.light_speed > 0.0 && spec.mass > 0.0 && spec.hbar > 0.0) {
        return invalid("width, c, m and ħ must be positive");
    }
    if spec.momentum.len() != d {
        return invalid("packet momentum must match the grid dimension");
    }
    let p_max = (1.0 - spec.epsilon) * spec.mass * spec.light_speed;
    let p0_norm = spec.momentum.iter().map(|p| p * p).sum::<f64>().sqrt();
    if p0_norm >= p_max {
        return invalid(format!("mean momentum {p0_norm} lies outside the support radius {p_max}"));
    }
    let w2 = (spec.width / spec.hbar).powi(2);
    let spectrum = MomentumSpectrum::from_fn(grid.clone(), boundary, spec.hbar, |p| {
        let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dp2: f64 = p.iter().zip(&spec.momentum).map(|(a, b)| (a - b).powi(2)).sum();
        Complex64::new(bump(r / p_max) * (-0.5 * dp2 * w2).exp(), 0.0)
    })?
    .restrict_support(spec.mass * spec.light_speed, spec.epsilon)?;

    let peak = spectrum.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return invalid("the spectrum vanishes on this momentum grid; refine the grid");
    }
    let shape = grid.shape();
    let outer = (0..grid.len())
        .filter(|&i| {
            let m = grid.multi_index(i);
            (0..d).any(|k| m[k] == 0 || m[k] == shape[k] - 1)
        })
        .map(|i| spectrum.values()[i].norm())
        .fold(0.0, f64::max);
    if outer > NYQUIST_TOLERANCE * peak {
        let reach = (p0_norm + spec.hbar / spec.width * (2.0 * (1.0 / NYQUIST_TOLERANCE).ln()).sqrt()).min(p_max);
        // The largest positive momentum on an even axis is π(1 − 2/n)ħ/h.
        let n_min = shape.iter().copied().min().unwrap_or(1) as f64;
        let h_needed = std::f64::consts::PI * spec.hbar * (1.0 - 2.0 / n_min) / reach;
        return invalid(format!(
            "grid too coarse: spectrum reaches {:.2e} of its peak at the grid's largest momentum; need spacing h <= {h_needed:.4e}",
            outer / peak
        ));
    }
    let wf = WaveFunction::normalized(spectrum.to_position(), spec.mass, spec.charge, spec.hbar, 0.0)?;
    Ok((wf, spectrum))
}

/// `sqrt(⟨|p|²⟩)/m` under the spectrum.
pub fn rms_velocity(spectrum: &MomentumSpectrum, mass: f64) -> f64 {
    spectrum.expect(|p| p.iter().map(|x| x * x).sum()).sqrt() / mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Axis;

    fn spec(c: f64, p0: Vec<f64>) -> PacketSpec {
        PacketSpec {
            mass: 1.0,
            charge: 1.0,
            hbar: 1.0,
            light_speed: c,
            epsilon: 0.5,
            width: 2.0,
            momentum: p0,
        }
    }

    #[test]
    fn bump_is_compact_and_smooth() {
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-1.2), 0.0);
        assert_eq!(bump(0.0), 1.0);
        assert!(bump(0.999) < 1e-200);
    }

    #[test]
    fn spectrum_vanishes_beyond_the_support_radius() {
        // c small enough that the support radius falls inside the momentum grid.
        let g = Grid::new(vec![Axis::new(-24.0, 24.0, 96); 2]).unwrap();
        let s = PacketSpec { width: 2.0, ..spec(10.0, vec![0.3, 0.0]) };
        let (wf, sp) = build_compact_packet(&g, Boundary::Dirichlet, &s).unwrap();
        let p_max = 5.0;
        assert_eq!(sp.support_radius(), Some(p_max));
        let mut outside = 0;
        for (i, v) in sp.values().iter().enumerate() {
            if sp.momentum_norm(i) > p_max {
                assert_eq!(*v, Complex64::default());
                outside += 1;
            }
        }
        assert!(outside > 0);
        assert!((wf.norm() - 1.0).abs() < 1e-8);
        let mean_speed = sp.expect(|p| (p[0] * p[0] + p[1] * p[1]).sqrt());
        assert!(mean_speed < (1.0 - s.epsilon) * s.light_speed);
    }

    #[test]
    fn coarse_grid_is_rejected_with_the_needed_spacing() {
        let g = Grid::new(vec![Axis::new(-16.0, 16.0, 12)]).unwrap();
        let err = build_compact_packet(&g, Boundary::Dirichlet, &spec(83.0, vec![0.4])).unwrap_err();
        assert!(err.to_string().contains("need spacing"), "{err}");
        assert!(build_compact_packet(&g, Boundary::Dirichlet, &PacketSpec { epsilon: 1.0, ..spec(83.0, vec![0.4]) }).is_err());
    }
}
