use anyhow::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sqm_core::logse::{solve, LogSEProblem};
use sqm_core::qevolve::{max_energy, WaveFunction};
use sqm_core::radiation::{
    larmor_prefactor, report, symmetric_line, write_integrands_csv, BremsstrahlungReport, EnsembleOptions, EvolutionTrace,
    TraceOptions,
};
use sqm_core::rng::stream_rng;
use sqm_core::{Boundary, PhysicalConstants, ScalarField};

use super::Run;
use crate::manifest::Check;
use crate::setup::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Ground state of `x²/2`, held stationary.
    HarmonicGroundState,
    /// Free Gaussian, σ = 1, p = 0.5.
    FreePacket,
    /// Gaussian at rest in `V = 0.4 x`.
    LinearPotential,
    /// Displaced ground-state Gaussian in `x²/2`, half a period.
    CoherentState,
    /// `count` packets with random centre, width, momentum and potential.
    RandomPackets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub preset: Preset,
    /// In units where q = m = ħ = 1.
    pub light_speed: f64,
    pub count: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            preset: Preset::HarmonicGroundState,
            light_speed: 10.0,
            count: 20,
        }
    }
}

struct Case {
    wf: WaveFunction,
    v: ScalarField,
    options: TraceOptions,
}

fn harmonic_ground_state(seed: u64) -> Result<Case> {
    let g = symmetric_line(6.0, 241)?;
    let v = PotentialSpec::Harmonic { m_omega2: 1.0 }.field(&g, Boundary::Dirichlet)?;
    let sol = solve(&LogSEProblem::new(v.clone(), 0.5, 0.0)?.with_tolerance(1e-12))?;
    let wf = WaveFunction::normalized(sol.amplitude().to_complex(), 1.0, 1.0, 1.0, 0.0)?;
    Ok(Case {
        wf,
        v,
        options: TraceOptions {
            dt: 1e-4,
            steps: 2000,
            record_stride: 200,
            ensemble: Some(EnsembleOptions { samples: 20_000, seed }),
        },
    })
}

fn gaussian_case(l: f64, n: usize, center: f64, sigma: f64, p: f64, potential: PotentialSpec, options: TraceOptions) -> Result<Case> {
    let g = symmetric_line(l, n)?;
    let v = potential.field(&g, Boundary::Dirichlet)?;
    let wf = WaveFunction::gaussian(g, Boundary::Dirichlet, &[center], sigma, &[p], 1.0, 1.0, 1.0)?;
    Ok(Case { wf, v, options })
}

fn case_for(preset: Preset, seed: u64) -> Result<Case> {
    match preset {
        Preset::HarmonicGroundState => harmonic_ground_state(seed),
        Preset::FreePacket => gaussian_case(
            20.0,
            401,
            0.0,
            1.0,
            0.5,
            PotentialSpec::Zero,
            TraceOptions {
                dt: 4e-4,
                steps: 500,
                record_stride: 50,
                ensemble: None,
            },
        ),
        Preset::LinearPotential => gaussian_case(
            20.0,
            401,
            0.0,
            2.0,
            0.0,
            PotentialSpec::Linear { slope: 0.4 },
            TraceOptions {
                dt: 4e-4,
                steps: 500,
                record_stride: 50,
                ensemble: Some(EnsembleOptions { samples: 50, seed }),
            },
        ),
        Preset::CoherentState => gaussian_case(
            8.0,
            321,
            1.5,
            0.5f64.sqrt(),
            0.0,
            PotentialSpec::Harmonic { m_omega2: 1.0 },
            TraceOptions {
                dt: 1e-4,
                steps: 31_416,
                record_stride: 100,
                ensemble: None,
            },
        ),
        Preset::RandomPackets => unreachable!("random packets are built one by one"),
    }
}

/// Packet `index` of the randomized suite: a Gaussian on `[-20, 20]` in a
/// zero, harmonic, linear or double-well potential, run for half a time unit
/// with a step inside the Crank–Nicolson phase limit.
fn random_case(seed: u64, index: u64) -> Result<(serde_json::Value, Case)> {
    let mut rng = stream_rng(seed, index);
    let center = rng.random_range(-2.0..2.0);
    let sigma = rng.random_range(0.5..1.5);
    let p = rng.random_range(-1.0..1.0);
    let potential = match rng.random_range(0..4) {
        0 => PotentialSpec::Zero,
        1 => PotentialSpec::Harmonic {
            m_omega2: rng.random_range(0.25..2.0),
        },
        2 => PotentialSpec::Linear {
            slope: rng.random_range(-0.5..0.5),
        },
        _ => PotentialSpec::DoubleWell {
            a: rng.random_range(0.005..0.02),
            b: rng.random_range(0.1..0.5),
        },
    };
    let g = symmetric_line(20.0, 401)?;
    let v = potential.field(&g, Boundary::Dirichlet)?;
    let horizon = 0.5;
    let steps = (horizon * max_energy(&g, 1.0, 1.0, v.values()) / 0.05).ceil() as usize;
    let record_stride = (steps / 25).max(1);
    let wf = WaveFunction::gaussian(g, Boundary::Dirichlet, &[center], sigma, &[p], 1.0, 1.0, 1.0)?;
    let spec = json!({ "center": center, "sigma": sigma, "momentum": p, "potential": potential, "steps": steps });
    let case = Case {
        wf,
        v,
        options: TraceOptions {
            dt: horizon / steps as f64,
            steps,
            record_stride,
            ensemble: None,
        },
    };
    Ok((spec, case))
}

fn finite(r: &BremsstrahlungReport) -> [f64; 5] {
    let f = |e: sqm_core::radiation::Energy| e.finite().unwrap_or(f64::INFINITY);
    [f(r.classical), f(r.hydrodynamic), f(r.qed), f(r.bohmian), f(r.newtonian)]
}

fn preset_checks(preset: Preset, r: &BremsstrahlungReport, trace: &EvolutionTrace, c: f64, run: &mut Run) {
    let [classical, hydro, qed, bohm, newton] = finite(r);
    run.check(Check::holds("stochastic row is divergent", r.stochastic.is_divergent(), "always"));
    run.check(Check::at_least("qed >= hydrodynamic", qed, hydro));
    match preset {
        Preset::HarmonicGroundState => {
            let t = trace.times.last().copied().unwrap_or(0.0) - trace.times[0];
            run.check(Check::above("qed is positive", qed, 0.0));
            run.check(Check::relative("qed against the ground-state closed form", qed, larmor_prefactor(1.0, c) * 0.5 * t, 1e-3));
            run.check(Check::below("hydrodynamic / qed", hydro / qed, 1e-12));
            run.check(Check::below("bohmian / qed", bohm / qed, 1e-8));
        }
        Preset::FreePacket => {
            run.check(Check::absolute("classical vanishes", classical, 0.0, 1e-12));
            run.check(Check::absolute("hydrodynamic vanishes", hydro, 0.0, 1e-12));
            run.check(Check::absolute("qed vanishes", qed, 0.0, 1e-12));
            run.check(Check::absolute("newtonian vanishes", newton, 0.0, 1e-12));
            run.check(Check::above("bohmian is positive", bohm, 0.0));
        }
        Preset::LinearPotential => {
            run.check(Check::relative("hydrodynamic equals classical", hydro, classical, 1e-10));
            run.check(Check::relative("qed equals classical", qed, classical, 1e-10));
            run.check(Check::relative("newtonian equals classical", newton, classical, 1e-10));
        }
        Preset::CoherentState => {
            run.check(Check::relative("hydrodynamic follows the classical centre", hydro, classical, 1e-3));
        }
        Preset::RandomPackets => {}
    }
}

fn random_suite(p: &Params, run: &mut Run, consts: &PhysicalConstants) -> Result<()> {
    let mut rows = Vec::new();
    let mut csv = String::from("index,center,sigma,momentum,potential,classical,hydrodynamic,qed,bohmian,newtonian,stochastic\n");
    let mut violations = 0;
    let mut divergent = 0;
    for i in 0..p.count {
        let (spec, case) = random_case(run.seed, i as u64)?;
        let trace = EvolutionTrace::from_evolution(&case.wf, &case.v, &case.options)?;
        let r = report(&trace, &case.v, consts)?;
        let [classical, hydro, qed, bohm, newton] = finite(&r);
        if !r.qed.ge(&r.hydrodynamic) {
            violations += 1;
        }
        if r.stochastic.is_divergent() {
            divergent += 1;
        }
        let kind = spec["potential"]["kind"].as_str().unwrap_or("?").to_string();
        csv.push_str(&format!(
            "{i},{:e},{:e},{:e},{kind},{classical:e},{hydro:e},{qed:e},{bohm:e},{newton:e},divergent\n",
            spec["center"].as_f64().unwrap_or(f64::NAN),
            spec["sigma"].as_f64().unwrap_or(f64::NAN),
            spec["momentum"].as_f64().unwrap_or(f64::NAN),
        ));
        rows.push(json!({ "index": i, "packet": spec, "report": r }));
    }
    run.write_bytes("packets.csv", csv.as_bytes())?;
    run.write_json("report.json", &json!({ "preset": p.preset, "light_speed": p.light_speed, "packets": rows }))?;
    run.check(Check::holds(
        "qed >= hydrodynamic on every packet",
        violations == 0 && p.count > 0,
        format!("{violations} of {} packets violate", p.count),
    ));
    run.check(Check::holds(
        "stochastic row is divergent on every packet",
        divergent == p.count,
        format!("{divergent} of {} divergent", p.count),
    ));
    Ok(())
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    let consts = PhysicalConstants::new(1.0, 1.0, p.light_speed, 1.0, 1.0)?;
    if p.preset == Preset::RandomPackets {
        return random_suite(p, run, &consts);
    }
    let case = case_for(p.preset, run.seed)?;
    let trace = EvolutionTrace::from_evolution(&case.wf, &case.v, &case.options)?;
    let r = report(&trace, &case.v, &consts)?;
    run.write_with("integrands.csv", |w| write_integrands_csv(&trace, &case.v, &consts, w))?;
    run.write_json("report.json", &json!({ "preset": p.preset, "light_speed": p.light_speed, "report": r }))?;
    preset_checks(p.preset, &r, &trace, p.light_speed, run);
    Ok(())
}
