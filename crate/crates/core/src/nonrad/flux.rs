use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::gauss_legendre;

use super::retarded::{cross, dot, fields_at, jefimenko};
use super::source::FourCurrent;

/// Product rule on the unit sphere: Gauss–Legendre in `cos θ` times a uniform
/// azimuth. Weights sum to 4π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereRule {
    pub theta_nodes: usize,
    pub phi_nodes: usize,
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn product_gauss(theta_nodes: usize, phi_nodes: usize) -> Result<Self> {
        if theta_nodes == 0 || phi_nodes < 2 || !phi_nodes.is_multiple_of(2) {
            return invalid("sphere rule needs at least one polar node and an even azimuth count");
        }
        let (mu, wmu) = gauss_legendre(theta_nodes, -1.0, 1.0);
        let dphi = 2.0 * PI / phi_nodes as f64;
        let mut directions = Vec::with_capacity(theta_nodes * phi_nodes);
        let mut weights = Vec::with_capacity(theta_nodes * phi_nodes);
        for (m, w) in mu.iter().zip(&wmu) {
            let s = (1.0 - m * m).sqrt();
            for j in 0..phi_nodes {
                let phi = (j as f64 + 0.5) * dphi;
                directions.push([s * phi.cos(), s * phi.sin(), *m]);
                weights.push(w * dphi);
            }
        }
        Ok(SphereRule {
            theta_nodes,
            phi_nodes,
            directions,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Sphere of radius `radius` about `center`, sampled at `radius/c + offset`
/// for each offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldProbe {
    pub radius: f64,
    pub center: [f64; 3],
    pub rule: SphereRule,
    pub offsets: Vec<f64>,
}

/// Smallest allowed ratio of probe radius to source-box circumradius.
pub const MIN_RADIUS_FACTOR: f64 = 4.0;

impl FarFieldProbe {
    pub fn new(radius: f64, center: [f64; 3], rule: SphereRule, offsets: Vec<f64>) -> Result<Self> {
        if offsets.is_empty() || !(radius > 0.0) {
            return invalid("probe needs a positive radius and at least one time");
        }
        Ok(FarFieldProbe {
            radius,
            center,
            rule,
            offsets,
        })
    }

    /// Node weights scaled to the sphere; they sum to `4πR²`.
    pub fn area_weights(&self) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        self.rule.weights.iter().map(|w| w * r2).collect()
    }

    pub fn point(&self, node: usize) -> [f64; 3] {
        let d = self.rule.directions[node];
        [0, 1, 2].map(|k| self.center[k] + self.radius * d[k])
    }

    pub fn check_against(&self, src: &FourCurrent) -> Result<()> {
        let rc = src.box_circumradius();
        if self.radius < MIN_RADIUS_FACTOR * rc {
            return invalid(format!(
                "probe radius {} is below {MIN_RADIUS_FACTOR} times the source-box circumradius {rc}",
                self.radius
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", deny_unknown_fields)]
pub enum FieldMethod {
    /// Retarded fields from ρ, J and their time derivatives.
    Direct,
    /// Central differences of the retarded potentials.
    Potentials { hf: f64, dtf: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub radius: f64,
    /// Time-averaged outward power (erg/s).
    pub power: f64,
    /// Half the gap between the even- and odd-azimuth half rules.
    pub noise: f64,
    /// Outward power at each evaluation time.
    pub per_time: Vec<f64>,
    /// `S·n̂` per (time, node).
    #[serde(skip)]
    pub flux: Vec<Vec<f64>>,
}

/// Time-averaged `∮ (c/4π)(E×B)·dS` over the probe.
pub fn poynting_power(src: &FourCurrent, probe: &FarFieldProbe, method: FieldMethod) -> Result<PowerEstimate> {
    probe.check_against(src)?;
    let c = src.light_speed();
    let nodes = probe.rule.len();
    let times: Vec<f64> = probe.offsets.iter().map(|o| probe.radius / c + o).collect();
    let pairs: Vec<(usize, usize)> = (0..times.len()).flat_map(|t| (0..nodes).map(move |n| (t, n))).collect();
    let flux: Vec<f64> = pairs
        .par_iter()
        .map(|&(ti, ni)| {
            let x = probe.point(ni);
            let (e, b) = match method {
                FieldMethod::Direct => jefimenko(src, &x, times[ti]),
                FieldMethod::Potentials { hf, dtf } => fields_at(src, &x, times[ti], hf, dtf)?,
            };
            Ok(c / (4.0 * PI) * dot(&cross(&e, &b), &probe.rule.directions[ni]))
        })
        .collect::<Result<_>>()?;
    let w = probe.area_weights();
    let phi_n = probe.rule.phi_nodes;
    let mut per_time = Vec::with_capacity(times.len());
    let mut noise = 0.0;
    let mut table = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        let row = &flux[ti * nodes..(ti + 1) * nodes];
        let mut total = 0.0;
        let mut halves = [0.0; 2];
        for (ni, s) in row.iter().enumerate() {
            total += w[ni] * s;
            halves[(ni % phi_n) % 2] += 2.0 * w[ni] * s;
        }
        per_time.push(total);
        noise += 0.5 * (halves[0] - halves[1]).abs();
        table.push(row.to_vec());
    }
    let n = times.len() as f64;
    Ok(PowerEstimate {
        radius: probe.radius,
        power: per_time.iter().sum::<f64>() / n,
        noise: noise / n,
        per_time,
        flux: table,
    })
}

/// Per-sphere CSV `node,time,s_n`.
pub fn write_flux_csv<W: Write>(probe: &FarFieldProbe, estimate: &PowerEstimate, c: f64, mut w: W) -> Result<()> {
    writeln!(w, "node,time,s_n")?;
    for (ti, row) in estimate.flux.iter().enumerate() {
        let t = probe.radius / c + probe.offsets[ti];
        for (ni, s) in row.iter().enumerate() {
            writeln!(w, "{ni},{t:e},{s:e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Axis, Grid};
    use crate::nonrad::source::DipoleSpec;

    #[test]
    fn sphere_rule_integrates_low_harmonics() {
        let rule = SphereRule::product_gauss(12, 16).unwrap();
        assert_eq!(rule.len(), 192);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        let z2: f64 = rule.weights.iter().zip(&rule.directions).map(|(w, d)| w * d[2] * d[2]).sum();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-12);
        let x2y2: f64 = rule.weights.iter().zip(&rule.directions).map(|(w, d)| w * d[0] * d[0] * d[1] * d[1]).sum();
        assert!((x2y2 - 4.0 * PI / 15.0).abs() < 1e-12);
        let probe = FarFieldProbe::new(3.0, [0.0; 3], rule, vec![0.0]).unwrap();
        assert!((probe.area_weights().iter().sum::<f64>() - 36.0 * PI).abs() < 1e-10);
        assert!(SphereRule::product_gauss(4, 3).is_err());
    }

    fn dipole(omega: f64, c: f64, samples: usize, dt: f64) -> (FourCurrent, f64) {
        let g = Grid::new(vec![Axis::new(-4.0, 4.0, 9); 3]).unwrap();
        let spec = DipoleSpec {
            center: [0.0; 3],
            sigma: 0.75,
            moment: 0.3,
            omega,
            axis: [0.0, 0.0, 1.0],
        };
        let src = FourCurrent::oscillating_dipole(&g, &spec, c, 0.0, dt, samples, 0.0).unwrap();
        let larmor = (spec.moment * omega * omega).powi(2) / (3.0 * c.powi(3));
        (src, larmor)
    }

    fn offsets(period: f64, n: usize, start: f64) -> Vec<f64> {
        (0..n).map(|k| start + 2.0 * period * k as f64 / n as f64).collect()
    }

    #[test]
    fn dipole_power_is_larmor_at_every_radius() {
        let (omega, c) = (2.0, 20.0);
        let (src, larmor) = dipole(omega, c, 401, 0.02);
        let period = 2.0 * PI / omega;
        let rule = SphereRule::product_gauss(8, 12).unwrap();
        let mut powers = Vec::new();
        for r in [30.0, 60.0, 120.0] {
            let probe = FarFieldProbe::new(r, [0.0; 3], rule.clone(), offsets(period, 16, 1.0)).unwrap();
            let p = poynting_power(&src, &probe, FieldMethod::Direct).unwrap();
            assert!(((p.power - larmor) / larmor).abs() < 0.05, "R = {r}: {} vs {larmor}", p.power);
            assert!(p.noise < 0.1 * p.power);
            assert!(p.per_time.iter().all(|v| *v >= -1e-12 * larmor));
            powers.push(p.power);
        }
        let max = powers.iter().cloned().fold(f64::MIN, f64::max);
        let min = powers.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - min) / larmor < 0.1);
        // Linearity: doubling the source quadruples the power.
        let probe = FarFieldProbe::new(60.0, [0.0; 3], rule.clone(), offsets(period, 16, 1.0)).unwrap();
        let p1 = poynting_power(&src, &probe, FieldMethod::Direct).unwrap().power;
        let p3 = poynting_power(&src.scaled(3.0), &probe, FieldMethod::Direct).unwrap().power;
        assert!(((p3 - 9.0 * p1) / p3).abs() < 1e-10);
        let mut csv = Vec::new();
        let est = poynting_power(&src, &probe, FieldMethod::Direct).unwrap();
        write_flux_csv(&probe, &est, c, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 16 * 96);
        assert!(FarFieldProbe::new(10.0, [0.0; 3], rule, vec![0.0]).unwrap().check_against(&src).is_err());
    }

    #[test]
    fn potential_route_matches_larmor() {
        let (omega, c) = (2.0, 20.0);
        let (src, larmor) = dipole(omega, c, 801, 0.01);
        let period = 2.0 * PI / omega;
        let rule = SphereRule::product_gauss(6, 8).unwrap();
        let probe = FarFieldProbe::new(60.0, [0.0; 3], rule, offsets(period, 8, 1.0)).unwrap();
        let p = poynting_power(&src, &probe, FieldMethod::Potentials { hf: 0.05, dtf: 0.004 }).unwrap();
        assert!(((p.power - larmor) / larmor).abs() < 0.05, "{} vs {larmor}", p.power);
    }

    #[test]
    fn refining_the_sample_step_barely_moves_the_power() {
        let (omega, c) = (2.0, 20.0);
        let period = 2.0 * PI / omega;
        let rule = SphereRule::product_gauss(8, 12).unwrap();
        let probe = FarFieldProbe::new(60.0, [0.0; 3], rule, offsets(period, 16, 1.0)).unwrap();
        let (coarse, _) = dipole(omega, c, 201, 0.04);
        let (fine, _) = dipole(omega, c, 401, 0.02);
        let a = poynting_power(&coarse, &probe, FieldMethod::Direct).unwrap().power;
        let b = poynting_power(&fine, &probe, FieldMethod::Direct).unwrap().power;
        assert!(((a - b) / b).abs() < 0.01, "{a} vs {b}");
    }

    #[test]
    fn static_source_carries_no_power() {
        let g = Grid::new(vec![Axis::new(-4.0, 4.0, 9); 3]).unwrap();
        let src = FourCurrent::static_charge(&g, [0.0; 3], 1.0, 1.0, 20.0, 0.0, 0.05, 201).unwrap();
        let probe = FarFieldProbe::new(40.0, [0.0; 3], SphereRule::product_gauss(8, 12).unwrap(), vec![1.0, 2.0, 3.0]).unwrap();
        let p = poynting_power(&src, &probe, FieldMethod::Direct).unwrap();
        assert_eq!(p.power, 0.0);
    }
}
