use std::collections::BTreeMap;

use anyhow::{anyhow, Result};
use serde::{Deserialize, Serialize};
use sqm_core::units::{diffusion_for_planck, electrostatic_energy, erg_to_ev, planck_consistency};
use sqm_core::PhysicalConstants;

use super::Run;
use crate::manifest::Check;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub preset: String,
    /// Replaces the preset when given.
    pub constants: Option<PhysicalConstants>,
    /// Separation of the two charges in the electrostatic-energy row (cm).
    pub separation: f64,
    /// Temperature used for the ħ consistency round trip (K).
    pub temperature: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            preset: "electron".into(),
            constants: None,
            separation: 4.35e7,
            temperature: 2.725,
        }
    }
}

const ALPHA: f64 = 7.297_352_5e-3;
const TAU: f64 = 6.266e-24;
const ENERGY_AT_SEPARATION: f64 = 3.3e-15;
const ENERGY_AT_ONE_CM: f64 = 1.44e-7;

#[derive(Serialize)]
struct Table {
    presets: BTreeMap<&'static str, PhysicalConstants>,
    constants: PhysicalConstants,
    fine_structure: f64,
    inverse_fine_structure: f64,
    characteristic_time: f64,
    temperature: f64,
    thermal_energy_ev: f64,
    planck_diffusion: Option<f64>,
    implied_hbar: Option<f64>,
    separation: f64,
    electrostatic_energy_ev: f64,
    unit_separation_energy_ev: f64,
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    let consts = match p.constants {
        Some(c) => {
            c.validate()?;
            c
        }
        None => PhysicalConstants::preset(&p.preset).ok_or_else(|| {
            anyhow!(
                "unknown preset `{}`; available: {}",
                p.preset,
                PhysicalConstants::preset_names().join(", ")
            )
        })?,
    };
    let derived = consts.derived()?;
    let nu = diffusion_for_planck(&consts, p.temperature).ok();
    let implied = nu.map(|nu| planck_consistency(&consts, nu, p.temperature)).transpose()?;
    let table = Table {
        presets: PhysicalConstants::preset_names()
            .iter()
            .filter_map(|n| PhysicalConstants::preset(n).map(|c| (*n, c)))
            .collect(),
        constants: consts,
        fine_structure: derived.fine_structure,
        inverse_fine_structure: 1.0 / derived.fine_structure,
        characteristic_time: derived.characteristic_time,
        temperature: p.temperature,
        thermal_energy_ev: erg_to_ev(consts.boltzmann * p.temperature),
        planck_diffusion: nu,
        implied_hbar: implied,
        separation: p.separation,
        electrostatic_energy_ev: electrostatic_energy(consts.charge, p.separation)?,
        unit_separation_energy_ev: electrostatic_energy(consts.charge, 1.0)?,
    };
    run.write_json("constants.json", &table)?;

    let mut csv = String::from("quantity,value,unit\n");
    let rows: [(&str, Option<f64>, &str); 7] = [
        ("fine_structure", Some(table.fine_structure), "1"),
        ("characteristic_time", Some(table.characteristic_time), "s"),
        ("thermal_energy", Some(table.thermal_energy_ev), "eV"),
        ("planck_diffusion", table.planck_diffusion, "cm^2/s"),
        ("implied_hbar", table.implied_hbar, "erg s"),
        ("electrostatic_energy", Some(table.electrostatic_energy_ev), "eV"),
        ("unit_separation_energy", Some(table.unit_separation_energy_ev), "eV"),
    ];
    for (name, value, unit) in rows {
        let v = value.map(|v| format!("{v:e}")).unwrap_or_default();
        csv.push_str(&format!("{name},{v},{unit}\n"));
    }
    run.write_bytes("constants.csv", csv.as_bytes())?;

    if let Some(h) = implied {
        run.check(Check::relative("hbar round trip through the Planck diffusion", h, consts.hbar, 1e-12));
    }
    if consts != PhysicalConstants::ELECTRON {
        run.note("reference values exist for the electron constants only; those checks were skipped");
        return Ok(());
    }
    run.check(Check::relative("fine structure constant", table.fine_structure, ALPHA, 1e-8));
    run.check(Check::relative("characteristic time", table.characteristic_time, TAU, 1e-3));
    run.check(Check::relative("electrostatic energy at 1 cm", table.unit_separation_energy_ev, ENERGY_AT_ONE_CM, 5e-3));
    if p.separation == Params::default().separation {
        run.check(Check::relative(
            "electrostatic energy at 435 km",
            table.electrostatic_energy_ev,
            ENERGY_AT_SEPARATION,
            0.03,
        ));
    }
    Ok(())
}
