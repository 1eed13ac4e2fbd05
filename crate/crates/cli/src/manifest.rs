use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// How `measured` is compared with `target` and `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// `measured < tolerance`.
    Below,
    /// `measured > tolerance`.
    Above,
    /// `measured >= target`.
    AtLeast,
    /// `|measured − target| <= tolerance·|target|`.
    Relative,
    /// `|measured − target| <= tolerance`.
    Absolute,
    /// `|measured − target| / stderr <= tolerance`.
    ZScore,
    /// A yes/no property; `measured` is absent.
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub rule: Rule,
    pub measured: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, rule: Rule, measured: f64, target: Option<f64>, tolerance: f64, pass: bool) -> Self {
        Check {
            name: name.into(),
            rule,
            measured: Some(measured),
            target,
            tolerance: Some(tolerance),
            stderr: None,
            pass,
            detail: None,
        }
    }

    pub fn below(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self::new(name, Rule::Below, measured, None, limit, measured < limit)
    }

    pub fn above(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self::new(name, Rule::Above, measured, None, limit, measured > limit)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, target: f64) -> Self {
        let mut c = Self::new(name, Rule::AtLeast, measured, Some(target), 0.0, measured >= target);
        c.tolerance = None;
        c
    }

    pub fn relative(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = (measured - target).abs() <= tolerance * target.abs();
        Self::new(name, Rule::Relative, measured, Some(target), tolerance, pass)
    }

    pub fn absolute(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = (measured - target).abs() <= tolerance;
        Self::new(name, Rule::Absolute, measured, Some(target), tolerance, pass)
    }

    /// A zero standard error passes only on an exact match.
    pub fn z_score(name: impl Into<String>, estimate: f64, stderr: f64, target: f64, max_z: f64) -> Self {
        let d = (estimate - target).abs();
        let z = if d == 0.0 { 0.0 } else { d / stderr };
        let mut c = Self::new(name, Rule::ZScore, estimate, Some(target), max_z, z <= max_z);
        c.stderr = Some(stderr);
        c.detail = Some(format!("z = {z:.3}"));
        c
    }

    pub fn holds(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            rule: Rule::Holds,
            measured: None,
            target: None,
            tolerance: None,
            stderr: None,
            pass,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        let d = detail.into();
        self.detail = Some(match self.detail.take() {
            Some(old) => format!("{old}; {d}"),
            None => d,
        });
        self
    }

    /// One human-readable line.
    pub fn summary(&self) -> String {
        let verdict = if self.pass { "pass" } else { "FAIL" };
        let num = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
        let relation = match self.rule {
            Rule::Below => format!("{} < {}", num(self.measured), num(self.tolerance)),
            Rule::Above => format!("{} > {}", num(self.measured), num(self.tolerance)),
            Rule::AtLeast => format!("{} >= {}", num(self.measured), num(self.target)),
            Rule::Relative => format!("{} vs {} (rel {})", num(self.measured), num(self.target), num(self.tolerance)),
            Rule::Absolute => format!("{} vs {} (abs {})", num(self.measured), num(self.target), num(self.tolerance)),
            Rule::ZScore => format!("{} vs {} (max z {})", num(self.measured), num(self.target), num(self.tolerance)),
            Rule::Holds => String::new(),
        };
        let detail = self.detail.as_deref().map(|d| format!(" [{d}]")).unwrap_or_default();
        format!("{verdict:4} {}: {relation}{detail}", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Contents of `manifest.json`. The output directory and worker count are
/// left out so that the manifest is itself a reproducible output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub seed: u64,
    /// `{experiment, seed, params}` with every default filled in.
    pub config: Value,
    pub status: Status,
    pub checks: Vec<Check>,
    pub outputs: Vec<OutputFile>,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn status_for(checks: &[Check]) -> Status {
        if checks.iter().all(|c| c.pass) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.status {
            Status::Pass => 0,
            Status::Fail => 2,
            Status::Error => 1,
        }
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}
