//! Scenario files.
//!
//! ```toml
//! [model]
//! dim = 2
//! H = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
//! L = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
//! rho0 = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
//!
//! [simulation]
//! scheme = "homodyne"
//! dt = 0.001
//! t_max = 2.0
//! n_traj = 1
//! master_seed = 7
//! tracked = ["sigma_z", { name = "number", matrix = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]] }]
//!
//! [outputs]
//! write = ["records", "states", "moments", "innovations", "reports"]
//! ```
//!
//! Matrices are flat row-major lists of `[re, im]` pairs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use qfilt_core::hilbert::{min_eigenvalue, pauli, HERMITIAN_TOL, POSITIVITY_TOL, TRACE_TOL};
use qfilt_core::{ComplexMatrix, DensityMatrix, HermitianObservable, Scheme, SimConfig, SystemModel, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MAX_DIM: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {detail}")]
    Field { field: String, detail: String },
}

impl ConfigError {
    fn field(field: &str, detail: impl Into<String>) -> Self {
        ConfigError::Field { field: field.to_string(), detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    #[serde(rename = "H")]
    pub h: Vec<[f64; 2]>,
    #[serde(rename = "L")]
    pub l: Vec<[f64; 2]>,
    pub rho0: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(with = "scheme_name")]
    pub scheme: Scheme,
    pub dt: f64,
    pub t_max: f64,
    pub n_traj: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub tracked: Vec<TrackedSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrackedSpec {
    Named(String),
    Custom { name: String, matrix: Vec<[f64; 2]> },
}

impl TrackedSpec {
    pub fn name(&self) -> &str {
        match self {
            TrackedSpec::Named(n) => n,
            TrackedSpec::Custom { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Records,
    States,
    Moments,
    Innovations,
    Reports,
}

impl OutputKind {
    pub const ALL: [OutputKind; 5] =
        [OutputKind::Records, OutputKind::States, OutputKind::Moments, OutputKind::Innovations, OutputKind::Reports];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub write: Vec<OutputKind>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { write: OutputKind::ALL.to_vec() }
    }
}

impl OutputSpec {
    pub fn wants(&self, kind: OutputKind) -> bool {
        self.write.contains(&kind)
    }
}

mod scheme_name {
    use super::*;

    pub fn serialize<S: serde::Serializer>(s: &Scheme, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(s.name())
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(de: D) -> Result<Scheme, D::Error> {
        let s = String::deserialize(de)?;
        Scheme::from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub n_traj: Option<usize>,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: SystemModel,
    pub sim: SimConfig,
    pub tracked: Vec<(String, HermitianObservable)>,
}

impl FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = toml::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&text)
    }
}

impl ScenarioConfig {
    pub fn apply(&mut self, o: &Overrides) {
        let s = &mut self.simulation;
        if let Some(seed) = o.seed {
            s.master_seed = seed;
        }
        if let Some(dt) = o.dt {
            s.dt = dt;
        }
        if let Some(t) = o.t_max {
            s.t_max = t;
        }
        if let Some(n) = o.n_traj {
            s.n_traj = n;
        }
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<Scenario, ConfigError> {
        let dim = self.model.dim;
        if dim == 0 || dim > MAX_DIM {
            return Err(ConfigError::field("dim", format!("{dim} is outside 1..={MAX_DIM}")));
        }
        let h = matrix("H", dim, &self.model.h)?;
        let l = matrix("L", dim, &self.model.l)?;
        let rho = matrix("rho0", dim, &self.model.rho0)?;

        let dev = h.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            return Err(ConfigError::field("H hermiticity", format!("deviation {dev:e} exceeds {HERMITIAN_TOL:e}")));
        }
        let dev = rho.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            return Err(ConfigError::field("rho0 hermiticity", format!("deviation {dev:e} exceeds {HERMITIAN_TOL:e}")));
        }
        let trace = rho.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(ConfigError::field("rho0 trace", format!("{trace} differs from 1 by more than {TRACE_TOL:e}")));
        }
        let lowest = min_eigenvalue(&rho);
        if lowest < -POSITIVITY_TOL {
            return Err(ConfigError::field("rho0 positivity", format!("eigenvalue {lowest:e} below -{POSITIVITY_TOL:e}")));
        }
        let rho0 = DensityMatrix::new(rho).map_err(|e| ConfigError::field("rho0", e.to_string()))?;
        let h = HermitianObservable::new(h).map_err(|e| ConfigError::field("H", e.to_string()))?;
        let model = SystemModel::new(h, l, rho0).map_err(|e| ConfigError::field("model", e.to_string()))?;

        let s = &self.simulation;
        if !(s.dt > 0.0 && s.dt <= qfilt_core::dynamics::MAX_DT) {
            return Err(ConfigError::field("dt", format!("{} is outside (0, {}]", s.dt, qfilt_core::dynamics::MAX_DT)));
        }
        if !(s.t_max > 0.0 && s.t_max.is_finite()) {
            return Err(ConfigError::field("t_max", format!("{} must be positive", s.t_max)));
        }
        if s.n_traj == 0 {
            return Err(ConfigError::field("n_traj", "must be at least 1"));
        }
        // TOML integers are signed 64-bit.
        if s.master_seed > i64::MAX as u64 {
            return Err(ConfigError::field("master_seed", format!("{} exceeds {}", s.master_seed, i64::MAX)));
        }
        let sim = SimConfig::new(s.scheme, s.dt, s.t_max, s.master_seed)
            .map_err(|e| ConfigError::field("t_max", e.to_string()))?;

        let mut tracked = Vec::with_capacity(s.tracked.len());
        for t in &s.tracked {
            let obs = observable(t, dim)?;
            if tracked.iter().any(|(n, _): &(String, _)| n == t.name()) {
                return Err(ConfigError::field("tracked", format!("duplicate observable name {}", t.name())));
            }
            tracked.push((t.name().to_string(), obs));
        }
        Ok(Scenario { config: self.clone(), model, sim, tracked })
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    text.parse()
}

pub fn matrix_entries(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    m.as_slice().iter().map(|z| [z.re, z.im]).collect()
}

fn matrix(field: &str, dim: usize, entries: &[[f64; 2]]) -> Result<ComplexMatrix, ConfigError> {
    if entries.len() != dim * dim {
        return Err(ConfigError::field(field, format!("expected {} entries, found {}", dim * dim, entries.len())));
    }
    if entries.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ConfigError::field(field, "entries must be finite"));
    }
    let values: Vec<C64> = entries.iter().map(|[re, im]| C64::new(*re, *im)).collect();
    ComplexMatrix::from_row_slice(dim, &values).map_err(|e| ConfigError::field(field, e.to_string()))
}

fn observable(spec: &TrackedSpec, dim: usize) -> Result<HermitianObservable, ConfigError> {
    let field = format!("tracked {}", spec.name());
    let m = match spec {
        TrackedSpec::Named(name) => {
            let qubit = |m: ComplexMatrix| {
                if dim == 2 {
                    Ok(m)
                } else {
                    Err(ConfigError::field(&field, format!("Pauli observables need dim = 2, model has {dim}")))
                }
            };
            match name.as_str() {
                "sigma_x" => qubit(pauli::sigma_x())?,
                "sigma_y" => qubit(pauli::sigma_y())?,
                "sigma_z" => qubit(pauli::sigma_z())?,
                "identity" => ComplexMatrix::identity(dim),
                other => return Err(ConfigError::field("tracked", format!("unknown observable {other:?}"))),
            }
        }
        TrackedSpec::Custom { matrix: entries, .. } => matrix(&field, dim, entries)?,
    };
    HermitianObservable::new(m).map_err(|e| ConfigError::field(&format!("{field} hermiticity"), e.to_string()))
}
