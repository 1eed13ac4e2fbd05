//! Agreement between modules that reach the same quantity by different routes.

use sqm_core::fields::integrate;
use sqm_core::logse::{gausson_width, solve, LogSEProblem};
use sqm_core::markov::{kolmogorov_forward, simulate, InitialCondition, MarkovModel, SimulationOptions};
use sqm_core::radiation::symmetric_line;
use sqm_core::stats::MeanEstimate;
use sqm_core::{Boundary, ScalarField};

#[test]
fn ou_paths_and_forward_density_share_their_moments() {
    let (rate, nu, x0, t) = (0.7, 0.4, 1.2, 0.8);
    let model = MarkovModel::ornstein_uhlenbeck(rate, nu, 1).unwrap();

    let g = symmetric_line(6.0, 481).unwrap();
    let h = g.spacing(0);
    // Narrow Gaussian start so its own width barely shifts the variance.
    let s0: f64 = 0.05;
    let raw = ScalarField::from_fn(g, Boundary::Dirichlet, |x| (-(x[0] - x0).powi(2) / (2.0 * s0 * s0)).exp()).unwrap();
    let p0 = raw.scale(1.0 / integrate(&raw));
    let p = kolmogorov_forward(&model, &p0, t).unwrap().field;
    let xs: Vec<f64> = (0..p.values().len()).map(|i| p.grid().coords(i)[0]).collect();
    let mean_pde: f64 = xs.iter().zip(p.values()).map(|(x, w)| x * w).sum::<f64>() * h;
    let var_pde: f64 = xs.iter().zip(p.values()).map(|(x, w)| (x - mean_pde).powi(2) * w).sum::<f64>() * h;

    let options = SimulationOptions::new(t, 1e-3, 40_000, 17);
    let ens = simulate(&model, &InitialCondition::Point(vec![x0]), &options).unwrap();
    let last = ens.times().len() - 1;
    let col = ens.column(last, 0);
    let MeanEstimate { mean: m, stderr: se, .. } = MeanEstimate::from_samples(&col);
    assert!((m - mean_pde).abs() < 4.0 * se + 1e-3, "mean {m} +- {se} vs {mean_pde}");

    let decay = (-2.0 * rate * t).exp();
    let var_exact = s0 * s0 * decay + nu / rate * (1.0 - decay);
    let sq: Vec<f64> = col.iter().map(|x| (x - m).powi(2)).collect();
    let MeanEstimate { mean: v, stderr: vse, .. } = MeanEstimate::from_samples(&sq);
    assert!((var_pde - var_exact).abs() < 1e-3 * var_exact, "pde variance {var_pde} vs {var_exact}");
    assert!((v - (var_exact - s0 * s0 * decay)).abs() < 4.0 * vse, "path variance {v} +- {vse}");
}

#[test]
fn gausson_width_holds_across_temperatures() {
    let g = symmetric_line(10.0, 801).unwrap();
    let v = ScalarField::from_fn(g, Boundary::Dirichlet, |x| 0.5 * x[0] * x[0]).unwrap();
    for kt in [0.05, 0.5, 2.0] {
        let problem = LogSEProblem::new(v.clone(), 0.5, kt).unwrap().with_tolerance(1e-10);
        let sol = solve(&problem).unwrap();
        let expected = gausson_width(1.0, 0.5, kt).unwrap();
        let rel = (sol.width(0) - expected).abs() / expected;
        assert!(rel < 1e-4, "kT = {kt}: width {} vs {expected}", sol.width(0));
    }
}
