//! Physical constants in cgs-Gaussian units.
//!
//! Every quantity in this crate is expressed in cgs-Gaussian units: charge in
//! statcoulomb, mass in gram, length in cm, energy in erg. The single unit
//! conversion offered is erg <-> eV.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// 1 eV in erg (exact, SI 2019 definition of the elementary charge).
pub const ERG_PER_EV: f64 = 1.602_176_634e-12;

pub fn erg_to_ev(erg: f64) -> f64 {
    erg / ERG_PER_EV
}

pub fn ev_to_erg(ev: f64) -> f64 {
    ev * ERG_PER_EV
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Charge (statC). May be zero or negative.
    pub charge: f64,
    /// Rest mass (g).
    pub mass: f64,
    /// Speed of light (cm/s).
    pub light_speed: f64,
    /// Reduced Planck constant (erg s).
    pub hbar: f64,
    /// Boltzmann constant (erg/K).
    pub boltzmann: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub fine_structure: f64,
    /// Radiation-reaction time 2q^2/(3 m c^3), in seconds.
    pub characteristic_time: f64,
}

impl PhysicalConstants {
    /// Electron in CODATA 2018 cgs values.
    pub const ELECTRON: PhysicalConstants = PhysicalConstants {
        charge: 4.803_204_712_570_263e-10,
        mass: 9.109_383_701_5e-28,
        light_speed: 2.997_924_58e10,
        hbar: 1.054_571_817e-27,
        boltzmann: 1.380_649e-16,
    };

    pub fn new(charge: f64, mass: f64, light_speed: f64, hbar: f64, boltzmann: f64) -> Result<Self> {
        let c = PhysicalConstants {
            charge,
            mass,
            light_speed,
            hbar,
            boltzmann,
        };
        c.validate()?;
        Ok(c)
    }

    /// Dimensionless toy units (q = m = c = hbar = k = 1) for desk-scale experiments.
    pub fn natural() -> Self {
        PhysicalConstants {
            charge: 1.0,
            mass: 1.0,
            light_speed: 1.0,
            hbar: 1.0,
            boltzmann: 1.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "electron" => Some(Self::ELECTRON),
            "natural" => Some(Self::natural()),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["electron", "natural"]
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.charge, self.mass, self.light_speed, self.hbar, self.boltzmann];
        if all.iter().any(|v| !v.is_finite()) {
            return invalid("physical constants must be finite");
        }
        if self.mass <= 0.0 || self.light_speed <= 0.0 || self.hbar <= 0.0 || self.boltzmann <= 0.0 {
            return invalid("mass, light speed, hbar and Boltzmann constant must be strictly positive");
        }
        Ok(())
    }

    pub fn derived(&self) -> Result<DerivedConstants> {
        Ok(DerivedConstants {
            fine_structure: fine_structure(self)?,
            characteristic_time: characteristic_time(self)?,
        })
    }
}

fn check_finite(c: &PhysicalConstants) -> Result<()> {
    let all = [c.charge, c.mass, c.light_speed, c.hbar, c.boltzmann];
    if all.iter().any(|v| !v.is_finite()) {
        return invalid("physical constants must be finite");
    }
    Ok(())
}

/// q^2 / (hbar c).
pub fn fine_structure(c: &PhysicalConstants) -> Result<f64> {
    check_finite(c)?;
    if c.hbar <= 0.0 || c.light_speed <= 0.0 {
        return invalid("fine structure needs hbar > 0 and c > 0");
    }
    Ok(c.charge * c.charge / (c.hbar * c.light_speed))
}

/// tau = 2 q^2 / (3 m0 c^3), the pre-acceleration time scale.
pub fn characteristic_time(c: &PhysicalConstants) -> Result<f64> {
    check_finite(c)?;
    if c.mass <= 0.0 {
        return invalid("characteristic time needs m0 > 0");
    }
    if c.light_speed <= 0.0 {
        return invalid("characteristic time needs c > 0");
    }
    Ok(2.0 * c.charge * c.charge / (3.0 * c.mass * c.light_speed.powi(3)))
}

/// The hbar implied by hbar^2/2m = 2 tau nu kT with m = m0, i.e.
/// sqrt((8/3) q^2 nu k T / c^3). The mass cancels.
pub fn planck_consistency(c: &PhysicalConstants, nu: f64, temperature: f64) -> Result<f64> {
    check_finite(c)?;
    if !nu.is_finite() || !temperature.is_finite() || nu < 0.0 || temperature < 0.0 {
        return invalid("planck_consistency needs finite nu >= 0 and T >= 0");
    }
    if c.light_speed <= 0.0 {
        return invalid("planck_consistency needs c > 0");
    }
    let q2 = c.charge * c.charge;
    Ok((8.0 / 3.0 * q2 * nu * c.boltzmann * temperature / c.light_speed.powi(3)).sqrt())
}

/// Inverse of [`planck_consistency`]: the diffusion coefficient nu that makes
/// the implied hbar equal `c.hbar` at temperature `temperature`.
pub fn diffusion_for_planck(c: &PhysicalConstants, temperature: f64) -> Result<f64> {
    check_finite(c)?;
    let q2 = c.charge * c.charge;
    if temperature <= 0.0 || q2 == 0.0 {
        return invalid("need T > 0 and q != 0 to solve for nu");
    }
    Ok(3.0 * c.hbar * c.hbar * c.light_speed.powi(3) / (8.0 * q2 * c.boltzmann * temperature))
}

/// Electrostatic energy q^2/r of two equal charges, converted to eV.
pub fn electrostatic_energy(charge: f64, separation: f64) -> Result<f64> {
    if !charge.is_finite() || !separation.is_finite() {
        return invalid("electrostatic_energy needs finite arguments");
    }
    if separation <= 0.0 {
        return invalid("separation must be > 0");
    }
    Ok(erg_to_ev(charge * charge / separation))
}
