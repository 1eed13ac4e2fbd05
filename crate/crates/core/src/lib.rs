//! Numerical laboratory for stochastic models of quantum mechanics.
//!
//! All quantities are cgs-Gaussian. Diffusion follows the convention
//! `E[dW_i dW_j] = 2 nu delta_ij dt`: a zero-drift path has per-axis variance
//! `2 nu t`, not `nu t`.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fields;
pub mod linalg;
pub mod logse;
pub mod markov;
pub mod nonrad;
pub mod qevolve;
pub mod quadrature;
pub mod radiation;
pub mod rng;
pub mod stats;
pub mod units;
pub mod wiener;

pub use error::{Error, Result};
pub use fields::{Axis, Boundary, ComplexField, Field, Grid, MomentumSpectrum, ScalarField, VectorField};
pub use units::{DerivedConstants, PhysicalConstants};
