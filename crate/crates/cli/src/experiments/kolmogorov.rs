use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sqm_core::markov::{kolmogorov_forward, Generator, MarkovModel, TransitionDensity};
use sqm_core::{Boundary, ScalarField};

use super::Run;
use crate::manifest::Check;
use crate::setup::LineSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatParams {
    pub line: LineSpec,
    pub nu: f64,
    pub time: f64,
    pub tolerance: f64,
    pub mass_tolerance: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams {
            line: LineSpec {
                half_extent: 12.0,
                nodes: 481,
            },
            nu: 0.5,
            time: 2.0,
            tolerance: 1e-3,
            mass_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChapmanParams {
    pub line: LineSpec,
    pub rate: f64,
    pub nu: f64,
    pub sources: Vec<f64>,
    pub first: f64,
    pub second: f64,
    pub tolerance: f64,
}

impl Default for ChapmanParams {
    fn default() -> Self {
        ChapmanParams {
            line: LineSpec {
                half_extent: 5.0,
                nodes: 101,
            },
            rate: 1.0,
            nu: 0.5,
            sources: vec![-1.0, 0.3, 1.7],
            first: 0.3,
            second: 0.5,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub heat: HeatParams,
    pub chapman: ChapmanParams,
}

fn heat(p: &HeatParams, run: &mut Run) -> Result<()> {
    let g = p.line.grid()?;
    let bc = Boundary::Dirichlet;
    let model = MarkovModel::brownian(p.nu, 1)?;
    let gen = Generator::new(&model, &g, bc)?;
    let p0 = ScalarField::new(g.clone(), bc, gen.point_source(&[0.0])?)?;
    let sol = kolmogorov_forward(&model, &p0, p.time)?;
    let var = 2.0 * p.nu * p.time;
    let w = g.weights(bc);
    let mut csv = String::from("x,density,exact\n");
    let mut l1 = 0.0;
    for (i, &num) in sol.field.values().iter().enumerate() {
        let x = g.coords(i)[0];
        let exact = (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        l1 += w[i] * (num - exact).abs();
        csv.push_str(&format!("{x:e},{num:e},{exact:e}\n"));
    }
    run.write_bytes("heat_kernel.csv", csv.as_bytes())?;
    run.check(Check::below("heat kernel L1 error", l1, p.tolerance));
    run.check(Check::below("mass change per step", sol.stats.max_mass_change, p.mass_tolerance).with_detail(format!(
        "{} steps of at most {:e}",
        sol.stats.steps, sol.stats.dt
    )));
    run.write_json("heat_kernel.json", &json!({ "l1_error": l1, "stats": sol.stats }))
}

fn chapman(p: &ChapmanParams, run: &mut Run) -> Result<()> {
    let g = p.line.grid()?;
    let model = MarkovModel::ornstein_uhlenbeck(p.rate, p.nu, 1)?;
    let gen = Generator::new(&model, &g, Boundary::Dirichlet)?;
    let sources: Vec<Vec<f64>> = p.sources.iter().map(|&x| vec![x]).collect();
    let first = TransitionDensity::compute(&gen, &sources, p.first)?;
    let then = TransitionDensity::from_all_nodes(&gen, p.second)?;
    let direct = TransitionDensity::compute(&gen, &sources, p.first + p.second)?;
    let composed = first.compose(&then)?;
    let distances = composed.l1_distance(&direct)?;
    let worst = distances.iter().copied().fold(0.0, f64::max);
    run.check(Check::below("Chapman-Kolmogorov L1 on the OU model", worst, p.tolerance));
    run.write_json(
        "chapman_kolmogorov.json",
        &json!({
            "sources": p.sources,
            "times": [p.first, p.second],
            "l1_distance": distances,
            "direct_mass_errors": direct.mass_errors(),
            "composed_mass_errors": composed.mass_errors(),
        }),
    )
}

pub fn run(p: &Params, run: &mut Run) -> Result<()> {
    heat(&p.heat, run)?;
    chapman(&p.chapman, run)
}
