//! Invariant suites run by `qfilt verify`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::Result;
use qfilt_core::dynamics::simulate_streaming;
use qfilt_core::hilbert::{expectation, pauli};
use qfilt_core::oracle::{
    duality_sweep, dt_refinement_study, moment_mc_check, observed_order, self_consistency, tower_property_check,
    KrausStep,
};
use qfilt_core::qsc::{
    compensated_counting_path, counting_compensated_covariance, is_martingale_covariance, is_quantum_markov,
    sample_counting_version, time_ordered_moment, transition_apply, vacuum_covariance, CovarianceFunction,
    GaussianSampler, KernelFn, MomentSpec, NoiseCoefficients, TestFn,
};
use qfilt_core::stats::{covariance_with_error, SampleMoments};
use qfilt_core::{ComplexMatrix, DensityMatrix, HermitianObservable, Scheme, SimConfig, SystemModel, C64};
use rayon::prelude::*;

use crate::report::{Check, Report};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Covariance,
    Markov,
    Moments,
    Duality,
    Oracle,
    Ensemble,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] =
        [Suite::Covariance, Suite::Markov, Suite::Moments, Suite::Duality, Suite::Oracle, Suite::Ensemble];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Covariance => "covariance",
            Suite::Markov => "markov",
            Suite::Moments => "moments",
            Suite::Duality => "duality",
            Suite::Oracle => "oracle",
            Suite::Ensemble => "ensemble",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}; expected covariance, markov, moments, duality, oracle, ensemble or all"))
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Report> {
    let mut report = Report::new(&format!("verify {suite}"), seed);
    let suites: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    for s in suites {
        let checks = match s {
            Suite::Covariance => covariance(seed)?,
            Suite::Markov => markov(),
            Suite::Moments => moments(seed)?,
            Suite::Duality => duality(seed)?,
            Suite::Oracle => oracle(seed)?,
            Suite::Ensemble => ensemble(seed)?,
            Suite::All => unreachable!(),
        };
        report.extend(checks);
    }
    Ok(report)
}

pub fn decaying_qubit() -> SystemModel {
    SystemModel::new(
        HermitianObservable::new(ComplexMatrix::zeros(2)).unwrap(),
        pauli::sigma_minus(),
        DensityMatrix::new(pauli::excited()).unwrap(),
    )
    .unwrap()
}

fn sigma_z() -> HermitianObservable {
    HermitianObservable::new(pauli::sigma_z()).unwrap()
}

const PATHS: usize = 20_000;

fn covariance(seed: u64) -> Result<Vec<Check>> {
    const S: &str = "covariance";
    let mut out = Vec::new();
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let unit_rate: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(|_| 1.0);

    let bm = vacuum_covariance(&NoiseCoefficients::brownian(1.0))?;
    out.push(Check::within(S, "vacuum alpha=beta=1: c(0.5, 1)", 0.5, bm.eval(0.5, 1.0), 1e-10));
    let null = vacuum_covariance(&NoiseCoefficients::constant(zero, zero, zero, 1.0))?;
    out.push(Check::within(S, "vacuum alpha=beta=0: c(0.7, 0.9)", 0.0, null.eval(0.7, 0.9), 1e-12));
    let phase = NoiseCoefficients::new(Arc::new(|u| C64::from_polar(1.0, u)), Arc::new(|u| C64::from_polar(1.0, -u)), Arc::new(|_| C64::new(0.0, 0.0)), 1.0);
    out.push(Check::within(S, "vacuum alpha=e^{iu}: c(0.3, 0.8)", 0.3, vacuum_covariance(&phase)?.eval(0.3, 0.8), 1e-9));

    let gauge = counting_compensated_covariance(&NoiseCoefficients::constant(zero, zero, one, 1.0), unit_rate.clone())?;
    out.push(Check::within(S, "counting gamma=1: c(0.5, 1)", 0.5, gauge.eval(0.5, 1.0), 1e-10));
    let mixed = counting_compensated_covariance(&NoiseCoefficients::constant(one, one, one, 1.0), unit_rate.clone())?;
    out.push(Check::within(S, "counting alpha=beta=gamma=1: c(1, 1)", 2.0, mixed.eval(1.0, 1.0), 1e-10));
    let plain = counting_compensated_covariance(&NoiseCoefficients::brownian(1.0), unit_rate)?;
    out.push(Check::within(S, "counting gamma=0 reduces to vacuum: c(0.4, 0.9)", bm.eval(0.4, 0.9), plain.eval(0.4, 0.9), 1e-12));

    let sampler = GaussianSampler::new(&bm, &[0.0, 0.5, 1.0])?;
    let paths: Vec<[f64; 2]> = (0..PATHS as u64)
        .into_par_iter()
        .map(|i| {
            let p = sampler.sample_indexed(seed, i);
            [p.values[1], p.values[2]]
        })
        .collect();
    let a: Vec<f64> = paths.iter().map(|p| p[0]).collect();
    let b: Vec<f64> = paths.iter().map(|p| p[1]).collect();
    let (cov, err) = covariance_with_error(&a, &b);
    out.push(Check::within(S, "sampled cov(V_0.5, V_1), 20000 paths (3 sigma)", 0.5, cov, 3.0 * err));
    let (var, _) = covariance_with_error(&b, &b);
    out.push(Check::within(S, "sampled var(V_1), 20000 paths", 1.0, var, 0.03));

    let grid: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
    let rate = |_: f64| 1.0;
    let counts: Vec<[f64; 2]> = (0..PATHS as u64)
        .into_par_iter()
        .map(|i| {
            let p = sample_counting_version(&rate, &grid, seed.wrapping_mul(1_000_003).wrapping_add(i)).expect("valid grid");
            [*p.values.last().unwrap(), *compensated_counting_path(&p, &rate).values.last().unwrap()]
        })
        .collect();
    let n = SampleMoments::from_slice(&counts.iter().map(|c| c[0]).collect::<Vec<_>>());
    out.push(Check::within(S, "unit Poisson mean N_1, 20000 paths", 1.0, n.mean, 0.025));
    let m = SampleMoments::from_slice(&counts.iter().map(|c| c[1]).collect::<Vec<_>>());
    out.push(Check::within(S, "compensated mean at T = 1, 20000 paths", 0.0, m.mean, 0.025));
    Ok(out)
}

/// Kernel whose Markov factorization fails: e^{−(t−s)²}.
pub fn squared_exponential(horizon: f64) -> CovarianceFunction {
    CovarianceFunction::new(horizon, |s, t| (-(t - s) * (t - s)).exp())
}

fn markov() -> Vec<Check> {
    const S: &str = "markov";
    let bm = CovarianceFunction::brownian(2.0);
    let ou = CovarianceFunction::ornstein_uhlenbeck(2.0);
    let fine: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
    let coarse = [0.25, 0.5, 1.0];
    vec![
        Check::holds(S, "min is quantum-Markov on {0.25, 0.5, 1}", true, is_quantum_markov(&bm, &coarse, 1e-12)),
        Check::holds(S, "min is quantum-Markov on a 41-point grid", true, is_quantum_markov(&bm, &fine, 1e-12)),
        Check::holds(S, "min is a martingale covariance", true, is_martingale_covariance(&bm, &fine, 1e-12)),
        Check::holds(S, "OU is quantum-Markov", true, is_quantum_markov(&ou, &fine, 1e-12)),
        Check::holds(S, "OU is not a martingale covariance", false, is_martingale_covariance(&ou, &fine, 1e-12)),
        Check::holds(S, "zero kernel is a martingale covariance", true, is_martingale_covariance(&CovarianceFunction::zero(2.0), &fine, 1e-12)),
        Check::holds(S, "e^{-(t-s)^2} is not quantum-Markov on {0, 0.5, 1}", false, is_quantum_markov(&squared_exponential(2.0), &[0.0, 0.5, 1.0], 1e-12)),
    ]
}

pub fn moment_family() -> Vec<MomentSpec> {
    use TestFn::*;
    let spec = |t: &[f64], f: &[TestFn]| MomentSpec::new(t.to_vec(), f.to_vec()).expect("valid spec");
    let positive = Indicator { lo: 0.0, hi: f64::INFINITY };
    vec![
        spec(&[1.0], &[Coordinate]),
        spec(&[1.0], &[Square]),
        spec(&[0.5, 1.0], &[Coordinate, Coordinate]),
        spec(&[0.5, 1.0], &[Coordinate, TestFn::ONE]),
        spec(&[0.5, 1.0], &[Square, Square]),
        spec(&[0.25, 0.5, 1.0], &[Coordinate, Square, Coordinate]),
        spec(&[0.5, 1.0], &[positive, positive]),
        spec(&[0.3, 0.8], &[Indicator { lo: -0.5, hi: 0.5 }, Square]),
    ]
}

fn moments(seed: u64) -> Result<Vec<Check>> {
    const S: &str = "moments";
    let c = CovarianceFunction::brownian(1.0);
    let mut out = Vec::new();
    let square = KernelFn::from(TestFn::Square);
    let moved = transition_apply(&square, 0.5, 1.0, &c)?;
    out.push(Check::within(S, "K_{0.5,1} x^2 at x = 0.7", 0.49 + 0.5, moved.eval(0.7), 1e-10));
    let isserlis = MomentSpec::new(vec![0.5, 1.0], vec![TestFn::Square, TestFn::Square])?;
    out.push(Check::within(S, "E[V_0.5^2 V_1^2] analytic", 1.0, time_ordered_moment(&isserlis, &c)?, 1e-9));
    for (k, spec) in moment_family().iter().enumerate() {
        let r = moment_mc_check(spec, &c, PATHS, seed.wrapping_add(k as u64))?;
        out.push(Check::within(S, format!("{spec:?} vs Monte Carlo"), r.analytic, r.empirical, 3.0 * r.std_err));
    }
    Ok(out)
}

fn duality(seed: u64) -> Result<Vec<Check>> {
    const S: &str = "duality";
    Ok(vec![
        Check::at_most(S, "homodyne moment vs density form, 1000 qubit steps", 1e-12, duality_sweep(1000, 2, seed)?),
        Check::at_most(S, "homodyne moment vs density form, 200 steps, dim 3", 1e-12, duality_sweep(200, 3, seed)?),
        Check::at_most(S, "homodyne moment vs density form, 200 steps, dim 4", 1e-12, duality_sweep(200, 4, seed)?),
    ])
}

fn oracle(seed: u64) -> Result<Vec<Check>> {
    const S: &str = "oracle";
    let m = decaying_qubit();
    let mut out = Vec::new();
    for dt in [1e-2, 1e-3] {
        let bound = 10.0 * dt * dt;
        out.push(Check::at_most(S, format!("Kraus completeness, counting, dt = {dt}"), bound, KrausStep::counting(&m, dt).completeness_defect()));
        out.push(Check::at_most(S, format!("Kraus completeness, homodyne, dt = {dt}"), bound, KrausStep::homodyne_two_point(&m, dt).completeness_defect()));
    }
    for scheme in [Scheme::Homodyne, Scheme::Counting] {
        let cfg = SimConfig::new(scheme, 1e-3, 2.0, seed)?;
        let worst = (0..5).map(|i| self_consistency(&m, &cfg, i)).collect::<qfilt_core::Result<Vec<_>>>()?;
        out.push(Check::at_most(S, format!("self-consistency, {scheme}, 2000 steps"), 1e-10, worst.into_iter().fold(0.0, f64::max)));
    }
    let points = dt_refinement_study(&m, &sigma_z(), &[4e-3, 2e-3, 1e-3], 2.0, 1000, seed)?;
    out.push(Check::at_most(S, "RMS Kraus vs Belavkin at dt = 1e-3", 5e-2, points[2].rms));
    out.push(Check::holds(S, "RMS decreases under dt halving", true, points.windows(2).all(|w| w[1].rms < w[0].rms)));
    out.push(Check::at_least(S, "observed order over dt in {4e-3, 2e-3, 1e-3}", 0.9, observed_order(&points)));
    Ok(out)
}

fn ensemble(seed: u64) -> Result<Vec<Check>> {
    const S: &str = "ensemble";
    let m = decaying_qubit();
    let z = sigma_z();
    let mut out = Vec::new();

    let cfg = SimConfig::new(Scheme::Homodyne, 1e-3, 2.0, seed)?;
    let steps = [500, 1000, 2000];
    let e = qfilt_core::oracle::ensemble_moment(&m, &cfg, &z, 5000, &steps)?;
    for (s, k) in e.iter().zip(steps) {
        let t = k as f64 * cfg.dt;
        out.push(Check::within(S, format!("homodyne mean sigma_z at t = {t}"), 2.0 * (-t).exp() - 1.0, s.mean, 3.0 * s.std_err()));
    }

    for (scheme, t_max) in [(Scheme::Homodyne, 2.0), (Scheme::Counting, 20.0)] {
        let cfg = SimConfig::new(scheme, 1e-3, t_max, seed)?;
        let r = tower_property_check(&m, &cfg, &z, 5000)?;
        for d in r.deviations {
            out.push(Check::within(S, format!("{scheme} {} at t = {}", d.label, d.time), d.reference, d.estimate, 3.0 * d.sigma));
        }
    }

    let cfg = SimConfig::new(Scheme::Counting, 1e-3, 20.0, seed)?;
    let runs: Vec<(f64, f64)> = (0..20_000u64)
        .into_par_iter()
        .map(|i| counting_run(&m, &cfg, i))
        .collect::<qfilt_core::Result<_>>()?;
    let totals: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let jumps = SampleMoments::from_slice(&totals);
    out.push(Check::within(S, "mean jumps over T = 20, 20000 trajectories", 1.0, jumps.mean, 0.02));
    out.push(Check::holds(S, "every trajectory emits 0 or 1 photons", true, totals.iter().all(|&n| n == 0.0 || n == 1.0)));
    let compensated = SampleMoments::from_slice(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    out.push(Check::within(S, "compensated count mean at T = 20 (3 sigma)", 0.0, compensated.mean, 3.0 * compensated.std_err()));
    Ok(out)
}

/// Total count N_T and compensated count N_T − Σ tr(L†Lρ_k)dt of one counting
/// trajectory. The conditional states are the filter states for this record.
pub fn counting_run(m: &SystemModel, cfg: &SimConfig, index: u64) -> qfilt_core::Result<(f64, f64)> {
    let number = HermitianObservable::new(m.coupling_number().clone())?;
    let n = cfg.n_steps();
    let mut k = 0usize;
    let mut compensator = qfilt_core::stats::CompensatedSum::new();
    let mut failure = None;
    let record = simulate_streaming(m, cfg, index, |s| {
        if k < n {
            match expectation(s, &number) {
                Ok(rate) => compensator.add(rate * cfg.dt),
                Err(e) => failure = Some(e),
            }
        }
        k += 1;
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((record.total(), record.total() - compensator.value()))
}
