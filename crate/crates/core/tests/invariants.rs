use proptest::prelude::*;
use sqm_core::logse::gibbs_limit;
use sqm_core::markov::{kolmogorov_forward, stationary_drift, MarkovModel};
use sqm_core::qevolve::{evolve, max_energy, WaveFunction};
use sqm_core::radiation::{hydrodynamic, qed, symmetric_line, EvolutionTrace, TraceOptions};
use sqm_core::{fields::integrate, Boundary, ScalarField};

fn potential(kind: u8, a: f64, l: f64, n: usize) -> ScalarField {
    let g = symmetric_line(l, n).unwrap();
    ScalarField::from_fn(g, Boundary::Dirichlet, |x| match kind {
        0 => 0.0,
        1 => 0.5 * a * x[0] * x[0],
        2 => 0.3 * a * x[0],
        _ => 0.01 * a * x[0].powi(4) - 0.3 * x[0] * x[0],
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn qed_never_below_hydrodynamic(
        kind in 0u8..4,
        a in 0.25f64..2.0,
        center in -2.0f64..2.0,
        sigma in 0.5f64..1.5,
        p in -1.0f64..1.0,
    ) {
        let v = potential(kind, a, 16.0, 241);
        let wf = WaveFunction::gaussian(v.grid().clone(), Boundary::Dirichlet, &[center], sigma, &[p], 1.0, 1.0, 1.0).unwrap();
        let horizon = 0.3;
        let steps = (horizon * max_energy(v.grid(), 1.0, 1.0, v.values()) / 0.05).ceil() as usize;
        let options = TraceOptions { dt: horizon / steps as f64, steps, record_stride: 4, ensemble: None };
        let trace = EvolutionTrace::from_evolution(&wf, &v, &options).unwrap();
        let (h, q) = (hydrodynamic(&trace, 1.0, 10.0).unwrap(), qed(&trace, 1.0, 10.0).unwrap());
        prop_assert!(q >= h, "qed {q} < hydro {h}");
    }

    #[test]
    fn crank_nicolson_keeps_the_norm(
        kind in 0u8..4,
        a in 0.25f64..2.0,
        center in -1.5f64..1.5,
        p in -1.0f64..1.0,
    ) {
        let v = potential(kind, a, 16.0, 241);
        let wf = WaveFunction::gaussian(v.grid().clone(), Boundary::Dirichlet, &[center], 1.0, &[p], 1.0, 1.0, 1.0).unwrap();
        let dt = 0.05 / max_energy(v.grid(), 1.0, 1.0, v.values());
        let out = evolve(&wf, &v, 100.0 * dt, dt).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10, "norm {}", out.norm());
    }

    #[test]
    fn forward_equation_keeps_mass_and_sign(
        rate in 0.2f64..2.0,
        nu in 0.1f64..1.0,
        center in -1.0f64..1.0,
        t in 0.05f64..1.0,
    ) {
        let g = symmetric_line(6.0, 121).unwrap();
        let raw = ScalarField::from_fn(g, Boundary::Dirichlet, |x| (-(x[0] - center).powi(2) / 0.5).exp()).unwrap();
        let p0 = raw.scale(1.0 / integrate(&raw));
        let model = MarkovModel::ornstein_uhlenbeck(rate, nu, 1).unwrap();
        let sol = kolmogorov_forward(&model, &p0, t).unwrap();
        prop_assert!(sol.field.values().iter().all(|&v| v >= 0.0));
        prop_assert!((integrate(&sol.field) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gibbs_density_is_stationary_under_its_own_drift(
        kind in 1u8..4,
        a in 0.25f64..2.0,
        kt in 0.3f64..2.0,
        nu in 0.1f64..1.0,
    ) {
        let v = potential(kind, a, 6.0, 121);
        let rho = gibbs_limit(&v, kt).unwrap();
        let model = stationary_drift(&rho, nu).unwrap();
        let sol = kolmogorov_forward(&model, &rho, 0.5).unwrap();
        let drift: f64 = sol.field.values().iter().zip(rho.values()).map(|(x, y)| (x - y).abs()).sum::<f64>() * v.grid().spacing(0);
        prop_assert!(drift < 1e-9, "L1 change {drift}");
    }
}
