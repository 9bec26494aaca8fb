use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const TOOL: &str = "qfilt";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// |actual − expected| ≤ tolerance
    Within,
    /// actual ≤ expected
    AtMost,
    /// actual ≥ expected
    AtLeast,
    /// actual = expected (booleans as 0/1)
    Equals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub relation: Relation,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn make(suite: &str, name: impl Into<String>, relation: Relation, expected: f64, actual: f64, tolerance: f64) -> Self {
        let pass = match relation {
            Relation::Within => (actual - expected).abs() <= tolerance,
            Relation::AtMost => actual <= expected,
            Relation::AtLeast => actual >= expected,
            Relation::Equals => actual == expected,
        };
        Self { suite: suite.into(), name: name.into(), relation, expected, actual, tolerance, pass }
    }

    pub fn within(suite: &str, name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        Self::make(suite, name, Relation::Within, expected, actual, tolerance)
    }

    pub fn at_most(suite: &str, name: impl Into<String>, bound: f64, actual: f64) -> Self {
        Self::make(suite, name, Relation::AtMost, bound, actual, 0.0)
    }

    pub fn at_least(suite: &str, name: impl Into<String>, bound: f64, actual: f64) -> Self {
        Self::make(suite, name, Relation::AtLeast, bound, actual, 0.0)
    }

    pub fn holds(suite: &str, name: impl Into<String>, expected: bool, actual: bool) -> Self {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        Self::make(suite, name, Relation::Equals, b(expected), b(actual), 0.0)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let rel = match self.relation {
            Relation::Within => format!("{:.6e} vs {:.6e} (tol {:.3e})", self.actual, self.expected, self.tolerance),
            Relation::AtMost => format!("{:.6e} <= {:.3e}", self.actual, self.expected),
            Relation::AtLeast => format!("{:.6e} >= {:.3e}", self.actual, self.expected),
            Relation::Equals => format!("{} == {}", self.actual, self.expected),
        };
        write!(f, "{verdict} [{}] {}: {rel}", self.suite, self.name)
    }
}

/// Ensemble mean of a tracked observable against the Lindblad solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePoint {
    pub observable: String,
    pub t: f64,
    pub mean: f64,
    pub std_err: f64,
    pub lindblad: f64,
    pub sigmas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub master_seed: u64,
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ensemble: Vec<EnsemblePoint>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, master_seed: u64) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: None,
            master_seed,
            generator: qfilt_core::rng::GENERATOR_FAMILY.into(),
            scheme: None,
            dt: None,
            t_max: None,
            n_traj: None,
            checks: Vec::new(),
            ensemble: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        for c in checks {
            self.push(c);
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(REPORT_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{} {} {}", self.tool, self.version, self.command);
        if let Some(h) = &self.config_hash {
            out += &format!("  config {}", &h[..12.min(h.len())]);
        }
        out += &format!("  seed {}  generator {}\n", self.master_seed, self.generator);
        for c in &self.checks {
            out += &format!("{c}\n");
        }
        let failed = self.failures().count();
        out += &format!("{} checks, {} failed", self.checks.len(), failed);
        out
    }
}
