use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use sqm_core::nonrad::{log_dipole_check, verify_theorem1, LogDipoleConfig, NonradConfig};

use super::Run;
use crate::manifest::Check;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub flux: Option<NonradConfig>,
    pub log_dipole: Option<LogDipoleConfig>,
    pub larmor_tolerance: f64,
    pub spread_tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            flux: Some(NonradConfig::default()),
            log_dipole: Some(LogDipoleConfig::default()),
            larmor_tolerance: 0.05,
            spread_tolerance: 0.10,
        }
    }
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    if let Some(flux) = &p.flux {
        flux_test(flux, p, run)?;
    }
    if let Some(cfg) = &p.log_dipole {
        let log = log_dipole_check(cfg)?;
        run.write_json("log_dipole.json", &log)?;
        run.check(
            Check::below("log-term dipole acceleration / internal scale", log.ratio, cfg.threshold)
                .with_detail(format!("kT = {:.3e} erg", log.kt)),
        );
    }
    if p.flux.is_none() && p.log_dipole.is_none() {
        bail!("both parts are disabled");
    }
    Ok(())
}

fn flux_test(flux: &NonradConfig, p: &Params, run: &mut Run) -> Result<()> {
    let report = verify_theorem1(flux)?;
    let mut csv = String::from("radius,packet_power,packet_noise,control_power,control_noise,larmor\n");
    for i in 0..report.radii.len() {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e}\n",
            report.radii[i],
            report.packet_power[i],
            report.packet_noise[i],
            report.control_power[i],
            report.control_noise[i],
            report.larmor
        ));
    }
    run.write_bytes("flux.csv", csv.as_bytes())?;
    run.write_json("flux_report.json", &report)?;
    for d in &report.diagnostics {
        run.note(d.clone());
    }
    let (first, last) = (report.radii[0], report.radii[report.radii.len() - 1]);
    run.check(Check::below(
        "packet / control power at the largest radius",
        report.ratio_at_largest,
        flux.ratio_threshold,
    ));
    run.check(Check::holds(
        "packet power decays monotonically over the radii",
        report.monotone_decay,
        format!("radii {first:.4} to {last:.4}, factor {:.2}", last / first),
    ));
    run.check(Check::below("control against the Larmor power", report.control_larmor_error, p.larmor_tolerance));
    run.check(Check::below("control spread across the radii", report.control_spread, p.spread_tolerance));
    Ok(())
}
