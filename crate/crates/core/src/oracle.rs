//! Derivation-independent references for the filters and the classical versions.
//!
//! The filter oracle is the discrete repeated-measurement model: each step applies a
//! measurement operator M to the state and renormalises, ρ ← MρM†/tr(MρM†). It uses
//! no Itô calculus and is exact Bayes per step, so agreement with the continuous
//! filters as dt → 0 is a genuine cross-check.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{homodyne_from_noise, lindblad_evolve, simulate_streaming, MeasurementRecord, Scheme, SimConfig};
use crate::error::{Error, Result};
use crate::filters::{homodyne_increment, pi_step_homodyne, run_filter, FilterTrajectory};
use crate::hilbert::{
    expectation, hermitian_eigen, repair_state, ComplexMatrix, DensityMatrix, HermitianObservable, SystemModel, C64,
};
use crate::qsc::{time_ordered_moment, CovarianceFunction, GaussianSampler, MomentSpec};
use crate::rng::stream_rng;
use crate::stats::{linear_fit, SampleMoments};

const KRAUS_REPAIR_TOL: f64 = 1e-9;
const MIN_NORMALIZATION: f64 = 1e-300;

/// Measurement operators of one discrete time step.
#[derive(Debug, Clone)]
pub struct KrausStep {
    pub operators: Vec<ComplexMatrix>,
    pub scheme: Scheme,
    pub dt: f64,
}

impl KrausStep {
    /// Homodyne step resolved on the two-point outcome set dY = ±√dt with equal
    /// reference weights, which is enough to check completeness.
    pub fn homodyne_two_point(m: &SystemModel, dt: f64) -> Self {
        let s = dt.sqrt();
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let operators = [s, -s].iter().map(|&dy| homodyne_operator(m, dy, dt).scale(scale)).collect();
        Self { operators, scheme: Scheme::Homodyne, dt }
    }

    /// {M₀ = I + (−iH − ½L†L)dt, M₁ = L√dt}
    pub fn counting(m: &SystemModel, dt: f64) -> Self {
        let operators = vec![no_count_operator(m, dt), m.coupling().scale(dt.sqrt())];
        Self { operators, scheme: Scheme::Counting, dt }
    }

    /// Operator norm of Σ M†M − I.
    pub fn completeness_defect(&self) -> f64 {
        let dim = self.operators[0].dim();
        let mut sum = ComplexMatrix::zeros(dim);
        for op in &self.operators {
            sum += &(&op.adjoint() * op);
        }
        let defect = &sum - &ComplexMatrix::identity(dim);
        hermitian_eigen(&defect).values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

fn no_count_operator(m: &SystemModel, dt: f64) -> ComplexMatrix {
    let mut op = ComplexMatrix::identity(m.dim());
    op.add_scaled(m.drift(), dt);
    op
}

/// M(dY) = I + (−iH − ½L†L)dt + L·dY
fn homodyne_operator(m: &SystemModel, dy: f64, dt: f64) -> ComplexMatrix {
    let mut op = no_count_operator(m, dt);
    op.add_scaled(m.coupling(), dy);
    op
}

fn bayes_update(op: &ComplexMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let unnormalized = &(op * rho.matrix()) * &op.adjoint();
    let norm = unnormalized.trace().re;
    if !(norm >= MIN_NORMALIZATION) {
        return Err(Error::DegenerateUpdate { norm });
    }
    repair_state(&unnormalized.scale(1.0 / norm), KRAUS_REPAIR_TOL)
}

/// Discrete Kraus/Bayes filter over a record.
pub fn kraus_bayes_filter(
    m: &SystemModel,
    record: &MeasurementRecord,
    tracked: &[HermitianObservable],
) -> Result<FilterTrajectory> {
    record.validate()?;
    let dt = record.dt;
    let m0 = no_count_operator(m, dt);
    let m1 = m.coupling().scale(dt.sqrt());
    let mut rho = m.rho0().clone();
    let mut states = Vec::with_capacity(record.n_steps() + 1);
    let mut innovations = Vec::with_capacity(record.n_steps());
    for (k, &dy) in record.increments.iter().enumerate() {
        let next = match record.scheme {
            Scheme::Homodyne => {
                innovations.push(dy - m.homodyne_mean(rho.matrix()) * dt);
                bayes_update(&homodyne_operator(m, dy, dt), &rho)
            }
            Scheme::Counting => {
                innovations.push(dy - m.emission_rate(rho.matrix()) * dt);
                bayes_update(if dy == 1.0 { &m1 } else { &m0 }, &rho)
            }
        }
        .map_err(|e| e.at_step(k))?;
        states.push(std::mem::replace(&mut rho, next));
    }
    states.push(rho);
    FilterTrajectory::from_states(record.scheme, dt, states, innovations, tracked)
}

pub fn rms_difference(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

/// Conditioning functionals g(Y) used by the tower-property check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// g ≡ 1
    Constant,
    /// g = Y_{t/2}
    HalfTimeRecord,
    /// g = 1[Y_{t/2} > 0]
    HalfTimeSign,
}

impl Conditioning {
    pub const ALL: [Conditioning; 3] = [Conditioning::Constant, Conditioning::HalfTimeRecord, Conditioning::HalfTimeSign];

    fn eval(self, y_half: f64) -> f64 {
        match self {
            Conditioning::Constant => 1.0,
            Conditioning::HalfTimeRecord => y_half,
            Conditioning::HalfTimeSign => {
                if y_half > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Conditioning::Constant => "1",
            Conditioning::HalfTimeRecord => "Y(t/2)",
            Conditioning::HalfTimeSign => "1[Y(t/2)>0]",
        }
    }
}

/// One Monte-Carlo comparison expressed in units of its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub label: String,
    pub time: f64,
    pub estimate: f64,
    pub reference: f64,
    pub sigma: f64,
    pub pass: bool,
}

impl Deviation {
    /// Passes iff |estimate − reference| ≤ 3σ; `floor` bounds σ below.
    fn new(label: String, time: f64, estimate: f64, reference: f64, sigma: f64, floor: f64) -> Self {
        let sigma = sigma.max(floor);
        let pass = (estimate - reference).abs() <= 3.0 * sigma;
        Self { label, time, estimate, reference, sigma, pass }
    }

    pub fn in_sigmas(&self) -> f64 {
        (self.estimate - self.reference) / self.sigma
    }
}

#[derive(Debug, Clone)]
pub struct TowerReport {
    pub scheme: Scheme,
    pub n_traj: usize,
    pub deviations: Vec<Deviation>,
}

impl TowerReport {
    pub fn pass(&self) -> bool {
        self.deviations.iter().all(|d| d.pass)
    }
}

/// Checks E[π_t(X)·g(Y)] = E[⟨X⟩_truth,t·g(Y)] for g in [`Conditioning::ALL`] at
/// t ∈ {T/4, T/2, T}, plus E[π_t(X)] against the Lindblad solution.
///
/// Standard errors are floored at ‖X‖/n_traj, the resolution of an n-sample mean of
/// a bounded observable, so that almost-deterministic ensembles are not judged on
/// a vanishing sample spread.
pub fn tower_property_check(
    m: &SystemModel,
    cfg: &SimConfig,
    x: &HermitianObservable,
    n_traj: usize,
) -> Result<TowerReport> {
    if n_traj < 1000 {
        return Err(Error::InvalidInput(format!("tower property check needs n_traj >= 1000, got {n_traj}")));
    }
    cfg.validate()?;
    let n = cfg.n_steps();
    let check_steps: Vec<usize> = [n / 4, n / 2, n].into_iter().filter(|&k| k > 0).collect();

    struct Sample {
        filter: Vec<f64>,
        truth: Vec<f64>,
        y_half: Vec<f64>,
    }

    let samples: Vec<Sample> = (0..n_traj as u64)
        .into_par_iter()
        .map(|index| {
            let mut truth_states = Vec::with_capacity(check_steps.len());
            let mut k = 0usize;
            let record = simulate_streaming(m, cfg, index, |s| {
                if check_steps.contains(&k) {
                    truth_states.push(expectation(s, x).unwrap_or(f64::NAN));
                }
                k += 1;
            })?;
            let ft = run_filter(m, &record, std::slice::from_ref(x))?;
            let y = record.cumulative();
            Ok(Sample {
                filter: check_steps.iter().map(|&k| ft.moments[0][k]).collect(),
                truth: truth_states,
                y_half: check_steps.iter().map(|&k| y[k / 2]).collect(),
            })
        })
        .collect::<Result<_>>()?;

    let times: Vec<f64> = check_steps.iter().map(|&k| k as f64 * cfg.dt).collect();
    let mut grid = vec![0.0];
    grid.extend_from_slice(&times);
    let lindblad = lindblad_evolve(m, &grid)?;
    let x_norm = hermitian_eigen(x.matrix()).values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let floor = x_norm / n_traj as f64;

    let mut deviations = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        for g in Conditioning::ALL {
            let diffs: Vec<f64> = samples.iter().map(|s| (s.filter[j] - s.truth[j]) * g.eval(s.y_half[j])).collect();
            let filt: Vec<f64> = samples.iter().map(|s| s.filter[j] * g.eval(s.y_half[j])).collect();
            let truth: Vec<f64> = samples.iter().map(|s| s.truth[j] * g.eval(s.y_half[j])).collect();
            let d = SampleMoments::from_slice(&diffs);
            let fm = SampleMoments::from_slice(&filt).mean;
            let tm = SampleMoments::from_slice(&truth).mean;
            deviations.push(Deviation::new(format!("tower g={}", g.name()), t, fm, tm, d.std_err(), floor));
        }
        let pis: Vec<f64> = samples.iter().map(|s| s.filter[j]).collect();
        let pm = SampleMoments::from_slice(&pis);
        let reference = expectation(&lindblad[j + 1], x)?;
        deviations.push(Deviation::new("ensemble vs lindblad".into(), t, pm.mean, reference, pm.std_err(), floor));
    }
    Ok(TowerReport { scheme: cfg.scheme, n_traj, deviations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub analytic: f64,
    pub empirical: f64,
    pub std_err: f64,
    pub pass: bool,
}

/// Monte-Carlo side of the time-ordered moment identity.
pub fn moment_mc_check(spec: &MomentSpec, c: &CovarianceFunction, n_paths: usize, seed: u64) -> Result<MomentReport> {
    if n_paths < 10_000 {
        return Err(Error::InvalidInput(format!("moment check needs n_paths >= 10000, got {n_paths}")));
    }
    let analytic = time_ordered_moment(spec, c)?;
    let mut grid: Vec<f64> = spec.times().to_vec();
    grid.dedup();
    let index: Vec<usize> = spec.times().iter().map(|t| grid.iter().position(|g| g == t).unwrap()).collect();
    let sampler = GaussianSampler::new(c, &grid)?;
    let values: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample_indexed(seed, i);
            let at: Vec<f64> = index.iter().map(|&k| path.values[k]).collect();
            spec.integrand(&at)
        })
        .collect();
    let s = SampleMoments::from_slice(&values);
    let std_err = s.std_err();
    let pass = (analytic - s.mean).abs() <= 3.0 * std_err;
    Ok(MomentReport { analytic, empirical: s.mean, std_err, pass })
}

/// Random qubit instance for per-step checks.
#[derive(Debug, Clone)]
pub struct RandomStep {
    pub model: SystemModel,
    pub observable: HermitianObservable,
    pub dy: f64,
    pub dt: f64,
}

pub fn random_step<R: Rng + ?Sized>(rng: &mut R, dim: usize, dt: f64) -> RandomStep {
    let mut entry = |scale: f64| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
    let h = ComplexMatrix::from_fn(dim, |_, _| entry(1.0)).hermitian_part();
    let l = ComplexMatrix::from_fn(dim, |_, _| entry(1.0));
    let a = ComplexMatrix::from_fn(dim, |_, _| entry(1.0));
    let x = ComplexMatrix::from_fn(dim, |_, _| entry(1.0)).hermitian_part();
    let aa = &a * &a.adjoint();
    let rho = DensityMatrix::new(aa.scale(1.0 / aa.trace().re).hermitian_part()).expect("Gram matrix is a state");
    let model = SystemModel::new(HermitianObservable::new(h).unwrap(), l, rho).unwrap();
    let dy = model.homodyne_mean(model.rho0().matrix()) * dt + dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
    RandomStep { model, observable: HermitianObservable::new(x).unwrap(), dy, dt }
}

/// Largest |π-form increment − tr(X·Δρ)| over `n` random homodyne steps.
pub fn duality_sweep(n: usize, dim: usize, seed: u64) -> Result<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n {
        let s = random_step(&mut rng, dim, 1e-3);
        let rho = s.model.rho0();
        let moment = pi_step_homodyne(&s.model, rho, &s.observable, s.dy, s.dt)?;
        let delta = homodyne_increment(&s.model, rho, s.dy, s.dt)?;
        worst = worst.max((moment - delta.trace_product(s.observable.matrix()).re).abs());
    }
    Ok(worst)
}

/// Max entrywise deviation between the truth states of trajectory `index` and the
/// filter driven by its record.
pub fn self_consistency(m: &SystemModel, cfg: &SimConfig, index: u64) -> Result<f64> {
    let truth = crate::dynamics::simulate(m, cfg, index)?;
    let ft = run_filter(m, &truth.record, &[])?;
    Ok(truth
        .states
        .iter()
        .zip(&ft.states)
        .map(|(a, b)| (a.matrix() - b.matrix()).max_abs())
        .fold(0.0, f64::max))
}

/// RMS gap between Kraus and continuous filters at one step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub dt: f64,
    pub rms: f64,
}

/// Pathwise dt-refinement study on homodyne records.
///
/// For every path a Brownian motion is drawn on the finest grid; coarser grids sum
/// the fine increments, so all step sizes see the same noise. At each dt a truth
/// record is generated and both the continuous filter and the Kraus oracle are run
/// on it; the RMS over time of π(X) differences is pooled over paths.
pub fn dt_refinement_study(
    m: &SystemModel,
    x: &HermitianObservable,
    dts: &[f64],
    t_max: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<ConvergencePoint>> {
    let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let n_fine = (t_max / finest).round() as usize;
    let ratios: Vec<usize> = dts
        .iter()
        .map(|dt| {
            let r = (dt / finest).round();
            if (r * finest - dt).abs() > 1e-9 * dt || n_fine % (r as usize) != 0 {
                Err(Error::InvalidInput(format!("dt = {dt} is not a refinement multiple of {finest}")))
            } else {
                Ok(r as usize)
            }
        })
        .collect::<Result<_>>()?;

    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p);
            let sd = finest.sqrt();
            let fine: Vec<f64> = (0..n_fine).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            dts.iter()
                .zip(&ratios)
                .map(|(&dt, &r)| {
                    let coarse = fine.chunks(r).map(|c| c.iter().sum::<f64>());
                    let record = homodyne_from_noise(m, dt, coarse, |_| {})?;
                    let cont = run_filter(m, &record, std::slice::from_ref(x))?;
                    let bayes = kraus_bayes_filter(m, &record, std::slice::from_ref(x))?;
                    let d = rms_difference(&cont.moments[0], &bayes.moments[0]);
                    Ok(d * d)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    Ok(dts
        .iter()
        .enumerate()
        .map(|(i, &dt)| ConvergencePoint { dt, rms: (per_path.iter().map(|v| v[i]).sum::<f64>() / n_paths as f64).sqrt() })
        .collect())
}

/// Slope of log(rms) against log(dt).
pub fn observed_order(points: &[ConvergencePoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.dt.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.rms.ln()).collect();
    linear_fit(&xs, &ys).0
}

/// Ensemble mean and standard error of π_t(X) at selected grid steps.
pub fn ensemble_moment(
    m: &SystemModel,
    cfg: &SimConfig,
    x: &HermitianObservable,
    n_traj: usize,
    steps: &[usize],
) -> Result<Vec<SampleMoments>> {
    let values: Vec<Vec<f64>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|index| {
            let mut out = Vec::with_capacity(steps.len());
            let mut k = 0usize;
            let mut failure = None;
            simulate_streaming(m, cfg, index, |s| {
                if steps.contains(&k) {
                    match expectation(s, x) {
                        Ok(v) => out.push(v),
                        Err(e) => failure = Some(e),
                    }
                }
                k += 1;
            })?;
            match failure {
                Some(e) => Err(e),
                None => Ok(out),
            }
        })
        .collect::<Result<_>>()?;
    Ok((0..steps.len())
        .map(|j| SampleMoments::from_slice(&values.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::pauli;

    fn decaying() -> SystemModel {
        SystemModel::new(
            HermitianObservable::new(ComplexMatrix::zeros(2)).unwrap(),
            pauli::sigma_minus(),
            DensityMatrix::new(pauli::excited()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn kraus_completeness() {
        let m = SystemModel::new(
            HermitianObservable::new(pauli::sigma_x().scale(0.5)).unwrap(),
            pauli::sigma_minus(),
            DensityMatrix::new(pauli::excited()).unwrap(),
        )
        .unwrap();
        for dt in [1e-2, 1e-3] {
            assert!(KrausStep::counting(&m, dt).completeness_defect() <= 10.0 * dt * dt);
            assert!(KrausStep::homodyne_two_point(&m, dt).completeness_defect() <= 10.0 * dt * dt);
        }
    }

    #[test]
    fn idle_model_stays_put() {
        let m = SystemModel::new(
            HermitianObservable::new(ComplexMatrix::zeros(2)).unwrap(),
            ComplexMatrix::zeros(2),
            DensityMatrix::pure(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap(),
        )
        .unwrap();
        let rec = MeasurementRecord::new(Scheme::Homodyne, 1e-3, vec![0.02, -0.01, 0.03]).unwrap();
        let ft = kraus_bayes_filter(&m, &rec, &[]).unwrap();
        assert!(ft.states.iter().all(|s| (s.matrix() - m.rho0().matrix()).max_abs() < 1e-15));
    }

    #[test]
    fn unitary_steps_agree_without_coupling() {
        // with L = 0 both filters reduce to ρ ← ρ − i[H,ρ]dt up to O(dt²)
        let m = SystemModel::new(
            HermitianObservable::new(pauli::sigma_x()).unwrap(),
            ComplexMatrix::zeros(2),
            DensityMatrix::new(pauli::excited()).unwrap(),
        )
        .unwrap();
        let dt = 1e-3;
        let rec = MeasurementRecord::new(Scheme::Homodyne, dt, vec![0.0; 1]).unwrap();
        let a = run_filter(&m, &rec, &[]).unwrap();
        let b = kraus_bayes_filter(&m, &rec, &[]).unwrap();
        assert!((a.states[1].matrix() - b.states[1].matrix()).max_abs() <= 2.0 * dt * dt);
    }

    #[test]
    fn single_jump_states_agree() {
        let m = decaying();
        let dt = 1e-3;
        let mut incs = vec![0.0; 100];
        incs[40] = 1.0;
        let rec = MeasurementRecord::new(Scheme::Counting, dt, incs).unwrap();
        let a = run_filter(&m, &rec, &[]).unwrap();
        let b = kraus_bayes_filter(&m, &rec, &[]).unwrap();
        assert!((a.states[41].matrix() - b.states[41].matrix()).max_abs() <= dt);
        assert!((a.states[41].matrix() - &pauli::ground()).max_abs() < 1e-12);
    }

    #[test]
    fn duality_holds_for_larger_dims() {
        for dim in [2, 3, 4] {
            assert!(duality_sweep(200, dim, dim as u64).unwrap() < 1e-12);
        }
    }

    #[test]
    fn degenerate_update_detected() {
        let m = decaying();
        let dark = m.with_initial_state(DensityMatrix::new(pauli::ground()).unwrap()).unwrap();
        let rec = MeasurementRecord::new(Scheme::Counting, 1e-3, vec![1.0]).unwrap();
        let err = kraus_bayes_filter(&dark, &rec, &[]).unwrap_err();
        assert!(matches!(err.root(), Error::DegenerateUpdate { .. }));
    }

    #[test]
    fn preconditions_enforced() {
        let m = decaying();
        let cfg = SimConfig::new(Scheme::Homodyne, 1e-3, 0.1, 0).unwrap();
        let x = HermitianObservable::new(pauli::sigma_z()).unwrap();
        assert!(tower_property_check(&m, &cfg, &x, 10).is_err());
        let spec = MomentSpec::new(vec![1.0], vec![crate::qsc::TestFn::Coordinate]).unwrap();
        assert!(moment_mc_check(&spec, &CovarianceFunction::brownian(1.0), 100, 0).is_err());
    }
}
