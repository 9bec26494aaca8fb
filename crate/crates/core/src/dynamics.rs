//! Truth simulation: conditional-state trajectories with their measurement records,
//! and the unconditional (Lindblad) reference solution.
//!
//! The truth generator is the filter recursion itself driven by sampled noise: for
//! homodyne detection dY = tr((L+L†)ρ)dt + dW, for photon counting dN ~ Bernoulli
//! (tr(L†Lρ)dt). A filter fed the resulting record from the same initial state
//! therefore retraces the truth states.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::filters::{jump_filter_step, ks_homodyne_step};
use crate::hilbert::{repair_state, ComplexMatrix, DensityMatrix, SystemModel};
use crate::rng::stream_rng;

pub const MAX_DT: f64 = 0.01;
pub const MAX_STEPS: f64 = 1e7;
const MAX_JUMP_PROBABILITY: f64 = 0.1;
const LINDBLAD_REPAIR_TOL: f64 = 1e-6;
const LINDBLAD_SUBSTEP: f64 = 2.5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Homodyne,
    Counting,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Homodyne => "homodyne",
            Scheme::Counting => "counting",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homodyne" => Ok(Scheme::Homodyne),
            "counting" => Ok(Scheme::Counting),
            other => Err(Error::InvalidInput(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(scheme: Scheme, dt: f64, t_max: f64, seed: u64) -> Result<Self> {
        let cfg = Self { dt, t_max, seed, scheme };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidInput(format!("dt = {} must lie in (0, {MAX_DT}]", self.dt)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidInput(format!("t_max = {} must be positive", self.t_max)));
        }
        let ratio = self.t_max / self.dt;
        if ratio > MAX_STEPS {
            return Err(Error::InvalidInput(format!("t_max/dt = {ratio} exceeds {MAX_STEPS}")));
        }
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("t_max = {} is not a multiple of dt = {}", self.t_max, self.dt)));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

/// Observation increments on a uniform grid t_k = k·dt.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub scheme: Scheme,
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl MeasurementRecord {
    pub fn new(scheme: Scheme, dt: f64, increments: Vec<f64>) -> Result<Self> {
        let r = Self { scheme, dt, increments };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("record spacing {} must be positive", self.dt)));
        }
        match self.scheme {
            Scheme::Homodyne => {
                if let Some(k) = self.increments.iter().position(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput(format!("non-finite homodyne increment at step {k}")));
                }
            }
            Scheme::Counting => {
                if let Some(k) = self.increments.iter().position(|&x| x != 0.0 && x != 1.0) {
                    return Err(Error::InvalidInput(format!("counting increment at step {k} is not 0 or 1")));
                }
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    /// Grid points t_0 … t_n.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.increments.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// Y at every grid point (Y_0 = 0).
    pub fn cumulative(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        y.push(acc);
        for dy in &self.increments {
            acc += dy;
            y.push(acc);
        }
        y
    }

    pub fn total(&self) -> f64 {
        self.increments.iter().sum()
    }
}

/// Truth states on the record grid, `states.len() == record.n_steps() + 1`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DensityMatrix>,
    pub record: MeasurementRecord,
}

impl Trajectory {
    pub fn grid(&self) -> Vec<f64> {
        self.record.grid()
    }
}

/// Unconditional evolution dρ/dt = 𝓛†(ρ) from ρ₀ at `grid[0]`, by classical RK4 with
/// substeps no longer than min(2.5e-3, 0.5/‖𝓛†‖).
pub fn lindblad_evolve(m: &SystemModel, grid: &[f64]) -> Result<Vec<DensityMatrix>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidInput("grid must be ascending".into()));
    }
    let rate = 2.0 * m.hamiltonian().matrix().frobenius_norm() + 2.0 * m.coupling().frobenius_norm().powi(2);
    let max_h = if rate > 0.0 { LINDBLAD_SUBSTEP.min(0.5 / rate) } else { LINDBLAD_SUBSTEP };

    let mut rho = m.rho0().matrix().clone();
    let mut states = Vec::with_capacity(grid.len());
    states.push(m.rho0().clone());
    for (k, w) in grid.windows(2).enumerate() {
        let span = w[1] - w[0];
        let substeps = (span / max_h).ceil().max(1.0) as usize;
        let h = span / substeps as f64;
        for _ in 0..substeps {
            rho = rk4_step(m, &rho, h);
        }
        let state = repair_state(&rho, LINDBLAD_REPAIR_TOL).map_err(|e| e.at_step(k))?;
        rho = state.matrix().clone();
        states.push(state);
    }
    Ok(states)
}

fn rk4_step(m: &SystemModel, rho: &ComplexMatrix, h: f64) -> ComplexMatrix {
    let k1 = m.adjoint_generator_raw(rho);
    let mut y = rho.clone();
    y.add_scaled(&k1, 0.5 * h);
    let k2 = m.adjoint_generator_raw(&y);
    let mut y = rho.clone();
    y.add_scaled(&k2, 0.5 * h);
    let k3 = m.adjoint_generator_raw(&y);
    let mut y = rho.clone();
    y.add_scaled(&k3, h);
    let k4 = m.adjoint_generator_raw(&y);
    let mut out = rho.clone();
    out.add_scaled(&k1, h / 6.0);
    out.add_scaled(&k2, h / 3.0);
    out.add_scaled(&k3, h / 3.0);
    out.add_scaled(&k4, h / 6.0);
    out
}

fn check_scheme(cfg: &SimConfig, expected: Scheme) -> Result<()> {
    cfg.validate()?;
    if cfg.scheme != expected {
        return Err(Error::InvalidInput(format!("configuration scheme is {}, expected {expected}", cfg.scheme)));
    }
    Ok(())
}

/// Homodyne truth driven by explicit Brownian increments dW (one per step).
///
/// `on_state` sees every state including ρ₀; the record is returned.
pub fn homodyne_from_noise(
    m: &SystemModel,
    dt: f64,
    noise: impl IntoIterator<Item = f64>,
    mut on_state: impl FnMut(&DensityMatrix),
) -> Result<MeasurementRecord> {
    let mut rho = m.rho0().clone();
    on_state(&rho);
    let mut increments = Vec::new();
    for (k, dw) in noise.into_iter().enumerate() {
        let dy = m.homodyne_mean(rho.matrix()) * dt + dw;
        rho = ks_homodyne_step(m, &rho, dy, dt).map_err(|e| e.at_step(k))?;
        on_state(&rho);
        increments.push(dy);
    }
    MeasurementRecord::new(crate::Scheme::Homodyne, dt, increments)
}

/// Counting truth driven by uniform variates (one per step): a count is registered
/// when u < tr(L†Lρ)dt.
pub fn counting_from_uniforms(
    m: &SystemModel,
    dt: f64,
    uniforms: impl IntoIterator<Item = f64>,
    mut on_state: impl FnMut(&DensityMatrix),
) -> Result<MeasurementRecord> {
    let mut rho = m.rho0().clone();
    on_state(&rho);
    let mut increments = Vec::new();
    for (k, u) in uniforms.into_iter().enumerate() {
        let p = m.emission_rate(rho.matrix()) * dt;
        if p > MAX_JUMP_PROBABILITY {
            return Err(Error::StepTooCoarse { probability: p }.at_step(k));
        }
        let dn = if u < p { 1.0 } else { 0.0 };
        rho = jump_filter_step(m, &rho, dn, dt).map_err(|e| e.at_step(k))?;
        on_state(&rho);
        increments.push(dn);
    }
    MeasurementRecord::new(crate::Scheme::Counting, dt, increments)
}

pub fn simulate_homodyne<R: Rng + ?Sized>(m: &SystemModel, cfg: &SimConfig, rng: &mut R) -> Result<Trajectory> {
    check_scheme(cfg, Scheme::Homodyne)?;
    let n = cfg.n_steps();
    let sd = cfg.dt.sqrt();
    let mut states = Vec::with_capacity(n + 1);
    let noise = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal));
    let record = homodyne_from_noise(m, cfg.dt, noise, |s| states.push(s.clone()))?;
    Ok(Trajectory { states, record })
}

pub fn simulate_counting<R: Rng + ?Sized>(m: &SystemModel, cfg: &SimConfig, rng: &mut R) -> Result<Trajectory> {
    check_scheme(cfg, Scheme::Counting)?;
    let n = cfg.n_steps();
    let mut states = Vec::with_capacity(n + 1);
    let uniforms = (0..n).map(|_| rng.random::<f64>());
    let record = counting_from_uniforms(m, cfg.dt, uniforms, |s| states.push(s.clone()))?;
    Ok(Trajectory { states, record })
}

/// Trajectory `index` of the ensemble seeded by `cfg.seed`.
pub fn simulate(m: &SystemModel, cfg: &SimConfig, index: u64) -> Result<Trajectory> {
    let mut rng = stream_rng(cfg.seed, index);
    match cfg.scheme {
        Scheme::Homodyne => simulate_homodyne(m, cfg, &mut rng),
        Scheme::Counting => simulate_counting(m, cfg, &mut rng),
    }
}

/// Same stream as [`simulate`], but states are only shown to `on_state`, not stored.
pub fn simulate_streaming(
    m: &SystemModel,
    cfg: &SimConfig,
    index: u64,
    on_state: impl FnMut(&DensityMatrix),
) -> Result<MeasurementRecord> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, index);
    let n = cfg.n_steps();
    match cfg.scheme {
        Scheme::Homodyne => {
            let sd = cfg.dt.sqrt();
            let noise = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal));
            homodyne_from_noise(m, cfg.dt, noise, on_state)
        }
        Scheme::Counting => {
            let uniforms = (0..n).map(|_| rng.random::<f64>());
            counting_from_uniforms(m, cfg.dt, uniforms, on_state)
        }
    }
}
