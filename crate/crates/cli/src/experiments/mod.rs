//! One driver per experiment plus the bookkeeping they share.

pub mod bremsstrahlung;
pub mod constants;
pub mod force_expectation;
pub mod gibbs_closure;
pub mod kolmogorov;
pub mod logse_solve;
pub mod nonrad_verify;
pub mod sde;
pub mod wiener_props;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Experiment;
use crate::manifest::{Check, Manifest, OutputFile, Status};

pub const MANIFEST: &str = "manifest.json";

/// State of one run: where outputs go and what has been recorded so far.
pub struct Run {
    out: PathBuf,
    pub seed: u64,
    verbose: bool,
    outputs: Vec<OutputFile>,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Run {
    pub fn new(out: &Path, seed: u64, verbose: bool) -> Self {
        Run {
            out: out.to_path_buf(),
            seed,
            verbose,
            outputs: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        let digest = Sha256::digest(bytes);
        self.outputs.push(OutputFile {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        self.progress(&format!("wrote {name} ({} bytes)", bytes.len()));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Buffers whatever `fill` writes and stores it under `name`.
    pub fn write_with(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> sqm_core::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf).with_context(|| format!("while producing {name}"))?;
        self.write_bytes(name, &buf)
    }

    pub fn check(&mut self, check: Check) {
        self.progress(&check.summary());
        self.checks.push(check);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        self.progress(&format!("note: {note}"));
        self.notes.push(note);
    }

    pub fn progress(&self, message: &str) {
        if self.verbose {
            eprintln!("[sqm] {message}");
        }
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }
}

fn drive<P>(params: &Value, run: &mut Run, resolved: &mut Value, body: fn(&P, &mut Run) -> Result<()>) -> Result<()>
where
    P: DeserializeOwned + Serialize,
{
    let p: P = serde_json::from_value(params.clone()).context("params do not match the experiment schema")?;
    *resolved = serde_json::to_value(&p)?;
    body(&p, run)
}

fn dispatch(experiment: Experiment, params: &Value, run: &mut Run, resolved: &mut Value) -> Result<()> {
    match experiment {
        Experiment::Constants => drive(params, run, resolved, constants::run),
        Experiment::LogseSolve => drive(params, run, resolved, logse_solve::run),
        Experiment::GibbsClosure => drive(params, run, resolved, gibbs_closure::run),
        Experiment::Sde => drive(params, run, resolved, sde::run),
        Experiment::Kolmogorov => drive(params, run, resolved, kolmogorov::run),
        Experiment::ForceExpectation => drive(params, run, resolved, force_expectation::run),
        Experiment::Bremsstrahlung => drive(params, run, resolved, bremsstrahlung::run),
        Experiment::NonradVerify => drive(params, run, resolved, nonrad_verify::run),
        Experiment::WienerProps => drive(params, run, resolved, wiener_props::run),
    }
}

/// Runs `experiment` with `params` and writes its outputs and manifest into
/// `out`. Failures inside the experiment end up in the manifest with status
/// `error`; the `Err` case is reserved for an unusable output directory.
pub fn execute(experiment: Experiment, params: &Value, seed: u64, out: &Path, verbose: bool) -> Result<Manifest> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let mut run = Run::new(out, seed, verbose);
    let mut resolved = params.clone();
    let outcome = dispatch(experiment, params, &mut run, &mut resolved);
    let (status, error) = match outcome {
        Ok(()) => (Manifest::status_for(&run.checks), None),
        Err(e) => (Status::Error, Some(format!("{e:#}"))),
    };
    let manifest = Manifest {
        tool: "sqm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment,
        seed,
        config: json!({ "experiment": experiment, "seed": seed, "params": resolved }),
        status,
        checks: run.checks,
        outputs: run.outputs,
        notes: run.notes,
        error,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = out.join(MANIFEST);
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(manifest)
}
