use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Constants,
    LogseSolve,
    GibbsClosure,
    Sde,
    Kolmogorov,
    ForceExpectation,
    Bremsstrahlung,
    NonradVerify,
    WienerProps,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Constants,
        Experiment::LogseSolve,
        Experiment::GibbsClosure,
        Experiment::Sde,
        Experiment::Kolmogorov,
        Experiment::ForceExpectation,
        Experiment::Bremsstrahlung,
        Experiment::NonradVerify,
        Experiment::WienerProps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Constants => "constants",
            Experiment::LogseSolve => "logse-solve",
            Experiment::GibbsClosure => "gibbs-closure",
            Experiment::Sde => "sde",
            Experiment::Kolmogorov => "kolmogorov",
            Experiment::ForceExpectation => "force-expectation",
            Experiment::Bremsstrahlung => "bremsstrahlung",
            Experiment::NonradVerify => "nonrad-verify",
            Experiment::WienerProps => "wiener-props",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The config document. `params` is validated later against the schema of
/// the chosen experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must agree with the experiment named on the command line when present.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).context("config does not match the schema")?;
        if !config.params.is_object() {
            bail!("`params` must be a JSON object");
        }
        if config.workers == Some(0) {
            bail!("`workers` must be at least 1");
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Checks the experiment named on the command line against the document.
    pub fn resolve_experiment(&self, requested: Experiment) -> Result<Experiment> {
        match self.experiment {
            Some(e) if e != requested => bail!("config is for experiment `{e}` but `{requested}` was requested"),
            _ => Ok(requested),
        }
    }
}
