//! Filtering recursions for homodyne detection and photon counting.
//!
//! Both filters are integrated in density (Schrödinger) form, which closes over all
//! observables; the moment forms dπ_t(X) are kept as per-step cross-checks.
//!
//! Homodyne:
//!   dρ = 𝓛†(ρ)dt + (Lρ + ρL† − tr((L+L†)ρ)ρ)(dY − tr((L+L†)ρ)dt)
//! Counting:
//!   dρ = 𝓛†(ρ)dt + (LρL†/tr(L†Lρ) − ρ)(dN − tr(L†Lρ)dt)

use crate::dynamics::{MeasurementRecord, Scheme};
use crate::error::{Error, Result};
use crate::hilbert::{
    expectation, lindblad_generator_raw, repair_state, ComplexMatrix, DensityMatrix, HermitianObservable,
    SystemModel,
};
use crate::stats::{linear_fit, CompensatedSum, SampleMoments};

/// Negative-eigenvalue budget per step, in units of dt·max(1, ‖L‖²).
/// The diffusive step leaves eigenvalues of order −(dW² − dt)·‖L‖².
pub const STEP_REPAIR_FACTOR: f64 = 50.0;

/// Largest negative eigenvalue a single Euler step may produce before it is treated
/// as a divergence rather than discretisation error.
pub fn step_repair_tol(m: &SystemModel, dt: f64) -> f64 {
    let l2 = m.coupling().frobenius_norm().powi(2);
    STEP_REPAIR_FACTOR * dt * l2.max(1.0)
}

/// Intensities below this switch the jump gain off.
pub const ZERO_RATE: f64 = 1e-12;

fn check_step_inputs(m: &SystemModel, rho: &DensityMatrix, dy: f64, dt: f64) -> Result<()> {
    if rho.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: rho.dim() });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("step dt = {dt} must be positive")));
    }
    if !dy.is_finite() {
        return Err(Error::InvalidInput("observation increment is not finite".into()));
    }
    Ok(())
}

/// Density-form homodyne increment Δρ before repair.
pub fn homodyne_increment(m: &SystemModel, rho: &DensityMatrix, dy: f64, dt: f64) -> Result<ComplexMatrix> {
    check_step_inputs(m, rho, dy, dt)?;
    Ok(homodyne_increment_raw(m, rho.matrix(), dy, dt))
}

fn homodyne_increment_raw(m: &SystemModel, rho: &ComplexMatrix, dy: f64, dt: f64) -> ComplexMatrix {
    let mean = m.homodyne_mean(rho);
    let innovation = dy - mean * dt;
    let l_rho = m.coupling() * rho;
    let mut gain = &l_rho + &l_rho.adjoint();
    gain.add_scaled(rho, -mean);
    let mut delta = m.adjoint_generator_raw(rho).scale(dt);
    delta.add_scaled(&gain, innovation);
    delta
}

/// One homodyne filter step followed by positivity repair.
pub fn ks_homodyne_step(m: &SystemModel, rho: &DensityMatrix, dy: f64, dt: f64) -> Result<DensityMatrix> {
    let mut next = homodyne_increment(m, rho, dy, dt)?;
    next += rho.matrix();
    repair_state(&next, step_repair_tol(m, dt))
}

/// Moment-form homodyne increment
/// dπ(X) = π(𝓛(X))dt + (π(L†X + XL) − π(L+L†)π(X))(dY − π(L+L†)dt).
pub fn pi_step_homodyne(
    m: &SystemModel,
    rho: &DensityMatrix,
    x: &HermitianObservable,
    dy: f64,
    dt: f64,
) -> Result<f64> {
    check_step_inputs(m, rho, dy, dt)?;
    let pi = |a: &ComplexMatrix| rho.matrix().trace_product(a).re;
    let xm = x.matrix();
    let drift = pi(&lindblad_generator_raw(m, xm));
    let cross = pi(&(&(m.coupling_adjoint() * xm) + &(xm * m.coupling())));
    let mean = m.homodyne_mean(rho.matrix());
    Ok(drift * dt + (cross - mean * pi(xm)) * (dy - mean * dt))
}

fn check_count(dn: f64) -> Result<()> {
    if dn != 0.0 && dn != 1.0 {
        return Err(Error::InvalidInput(format!("count increment {dn} is not 0 or 1")));
    }
    Ok(())
}

/// Density-form counting increment Δρ before repair.
pub fn counting_increment(m: &SystemModel, rho: &DensityMatrix, dn: f64, dt: f64) -> Result<ComplexMatrix> {
    check_step_inputs(m, rho, dn, dt)?;
    check_count(dn)?;
    let r = rho.matrix();
    let rate = m.emission_rate(r);
    if dn == 0.0 && rate >= ZERO_RATE {
        // LρL† cancels between drift and gain: Δρ = (Kρ + ρK† + tr(L†Lρ)ρ)dt
        let k_rho = m.drift() * r;
        let mut delta = &k_rho + &k_rho.adjoint();
        delta.add_scaled(r, rate);
        return Ok(delta.scale(dt));
    }
    let (generator, jump) = m.adjoint_generator_parts(r);
    let mut delta = generator.scale(dt);
    if rate < ZERO_RATE {
        if dn == 1.0 {
            return Err(Error::ZeroRateJump { intensity: rate });
        }
        return Ok(delta);
    }
    let innovation = dn - rate * dt;
    delta.add_scaled(&jump, innovation / rate);
    delta.add_scaled(r, -innovation);
    Ok(delta)
}

/// One counting filter step followed by positivity repair.
pub fn jump_filter_step(m: &SystemModel, rho: &DensityMatrix, dn: f64, dt: f64) -> Result<DensityMatrix> {
    let mut next = counting_increment(m, rho, dn, dt)?;
    next += rho.matrix();
    repair_state(&next, step_repair_tol(m, dt))
}

/// Moment-form counting increment
/// dπ(X) = π(𝓛(X))dt + (π(L†XL)/π(L†L) − π(X))(dN − π(L†L)dt).
pub fn pi_step_counting(
    m: &SystemModel,
    rho: &DensityMatrix,
    x: &HermitianObservable,
    dn: f64,
    dt: f64,
) -> Result<f64> {
    check_step_inputs(m, rho, dn, dt)?;
    check_count(dn)?;
    let pi = |a: &ComplexMatrix| rho.matrix().trace_product(a).re;
    let xm = x.matrix();
    let drift = pi(&lindblad_generator_raw(m, xm)) * dt;
    let rate = m.emission_rate(rho.matrix());
    if rate < ZERO_RATE {
        if dn == 1.0 {
            return Err(Error::ZeroRateJump { intensity: rate });
        }
        return Ok(drift);
    }
    let jumped = pi(&(&(m.coupling_adjoint() * xm) * m.coupling())) / rate;
    Ok(drift + (jumped - pi(xm)) * (dn - rate * dt))
}

/// Conditional states, tracked moments and innovations of one filter run.
#[derive(Debug, Clone)]
pub struct FilterTrajectory {
    pub scheme: Scheme,
    pub dt: f64,
    pub states: Vec<DensityMatrix>,
    /// `moments[i][k]` = π_{t_k}(X_i) for the i-th tracked observable.
    pub moments: Vec<Vec<f64>>,
    /// dY − π(L+L†)dt (homodyne) or dN − π(L†L)dt (counting), one per step.
    pub innovations: Vec<f64>,
}

impl FilterTrajectory {
    pub fn grid(&self) -> Vec<f64> {
        (0..self.states.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub(crate) fn from_states(
        scheme: Scheme,
        dt: f64,
        states: Vec<DensityMatrix>,
        innovations: Vec<f64>,
        tracked: &[HermitianObservable],
    ) -> Result<Self> {
        let moments = tracked
            .iter()
            .map(|x| states.iter().map(|s| expectation(s, x)).collect::<Result<Vec<f64>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scheme, dt, states, moments, innovations })
    }
}

/// Runs the scheme's filter over `record` from the model's initial state.
pub fn run_filter(
    m: &SystemModel,
    record: &MeasurementRecord,
    tracked: &[HermitianObservable],
) -> Result<FilterTrajectory> {
    run_filter_from(m, m.rho0(), record, tracked)
}

/// Runs the filter from an arbitrary prior, e.g. a deliberately wrong one.
pub fn run_filter_from(
    m: &SystemModel,
    prior: &DensityMatrix,
    record: &MeasurementRecord,
    tracked: &[HermitianObservable],
) -> Result<FilterTrajectory> {
    record.validate()?;
    if let Some(x) = tracked.iter().find(|x| x.dim() != m.dim()) {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: x.dim() });
    }
    let dt = record.dt;
    let mut states = Vec::with_capacity(record.n_steps() + 1);
    let mut innovations = Vec::with_capacity(record.n_steps());
    let mut rho = prior.clone();
    for (k, &dy) in record.increments.iter().enumerate() {
        let next = match record.scheme {
            Scheme::Homodyne => {
                innovations.push(dy - m.homodyne_mean(rho.matrix()) * dt);
                ks_homodyne_step(m, &rho, dy, dt)
            }
            Scheme::Counting => {
                innovations.push(dy - m.emission_rate(rho.matrix()) * dt);
                jump_filter_step(m, &rho, dy, dt)
            }
        }
        .map_err(|e| e.at_step(k))?;
        states.push(std::mem::replace(&mut rho, next));
    }
    states.push(rho);
    FilterTrajectory::from_states(record.scheme, dt, states, innovations, tracked)
}

/// Summary of one innovations sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationStatistics {
    /// Cumulative innovations I_{t_k}, starting at 0.
    pub cumulative: Vec<f64>,
    pub mean_increment: f64,
    /// Realised quadratic variation per unit time, Σ ΔI² / T.
    pub variance_slope: f64,
    /// Excess kurtosis of the increments normalised by √dt.
    pub excess_kurtosis: f64,
}

pub fn innovations_statistics(ft: &FilterTrajectory) -> InnovationStatistics {
    let incs = &ft.innovations;
    let mut cumulative = Vec::with_capacity(incs.len() + 1);
    let mut acc = CompensatedSum::new();
    cumulative.push(0.0);
    for &d in incs {
        acc.add(d);
        cumulative.push(acc.value());
    }
    let n = incs.len();
    if n == 0 {
        return InnovationStatistics { cumulative, mean_increment: 0.0, variance_slope: 0.0, excess_kurtosis: 0.0 };
    }
    let total_time = n as f64 * ft.dt;
    let qv: CompensatedSum = incs.iter().map(|d| d * d).collect();
    let z: Vec<f64> = incs.iter().map(|d| d / ft.dt.sqrt()).collect();
    let m = SampleMoments::from_slice(&z);
    let m2 = z.iter().map(|v| (v - m.mean).powi(2)).collect::<CompensatedSum>().value() / n as f64;
    let m4 = z.iter().map(|v| (v - m.mean).powi(4)).collect::<CompensatedSum>().value() / n as f64;
    let excess_kurtosis = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    InnovationStatistics {
        cumulative,
        mean_increment: acc.value() / n as f64,
        variance_slope: qv.value() / total_time,
        excess_kurtosis,
    }
}

/// Ensemble view of cumulative innovations: mean and standard error at every grid
/// point, and the slope of the ensemble variance against time.
#[derive(Debug, Clone)]
pub struct EnsembleInnovations {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub variance_slope: f64,
}

pub fn ensemble_innovations(runs: &[FilterTrajectory]) -> Result<EnsembleInnovations> {
    let first = runs.first().ok_or_else(|| Error::InvalidInput("empty ensemble".into()))?;
    let len = first.innovations.len() + 1;
    if runs.iter().any(|r| r.innovations.len() + 1 != len) {
        return Err(Error::InvalidInput("ensemble members have different lengths".into()));
    }
    let paths: Vec<Vec<f64>> = runs.iter().map(|r| innovations_statistics(r).cumulative).collect();
    let grid = first.grid();
    let mut mean = Vec::with_capacity(len);
    let mut std_err = Vec::with_capacity(len);
    let mut variance = Vec::with_capacity(len);
    for k in 0..len {
        let column: Vec<f64> = paths.iter().map(|p| p[k]).collect();
        let s = SampleMoments::from_slice(&column);
        mean.push(s.mean);
        std_err.push(if runs.len() > 1 { s.std_err() } else { 0.0 });
        variance.push(s.variance);
    }
    let (variance_slope, _) = linear_fit(&grid, &variance);
    Ok(EnsembleInnovations { grid, mean, std_err, variance_slope })
}
