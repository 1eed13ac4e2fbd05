//! Fixtures shared by the benchmarks.

use sqm_core::qevolve::{max_energy, WaveFunction};
use sqm_core::radiation::symmetric_line;
use sqm_core::{Boundary, ScalarField};

/// Harmonic potential `x²/2` on `[-l, l]` with `n` nodes.
pub fn harmonic_line(l: f64, n: usize) -> ScalarField {
    let g = symmetric_line(l, n).expect("valid grid");
    ScalarField::from_fn(g, Boundary::Dirichlet, |x| 0.5 * x[0] * x[0]).expect("finite potential")
}

/// Unit Gaussian packet in natural units with a small boost, and the time
/// step that puts `dt E_max / ħ` at 0.05.
pub fn packet_on(v: &ScalarField) -> (WaveFunction, f64) {
    let wf = WaveFunction::gaussian(v.grid().clone(), Boundary::Dirichlet, &[0.5], 1.0, &[0.3], 1.0, 1.0, 1.0)
        .expect("packet fits the grid");
    let dt = 0.05 / max_energy(v.grid(), 1.0, 1.0, v.values());
    (wf, dt)
}
