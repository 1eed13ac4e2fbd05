//! Reproducible experiment runner on top of `sqm-core`.
//!
//! A run reads one JSON config, executes a named experiment, writes its
//! outputs into a directory and finishes with `manifest.json`, which echoes
//! the resolved config and lists every output file and quantitative check.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod setup;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{execute, Run};
pub use manifest::{Check, Manifest, OutputFile, Rule, Status};
