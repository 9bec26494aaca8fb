//! Batch orchestration: truth simulation, filtering and per-run checks.

use std::path::Path;

use anyhow::{bail, Context, Result};
use qfilt_core::dynamics::{lindblad_evolve, simulate};
use qfilt_core::filters::{innovations_statistics, run_filter};
use qfilt_core::hilbert::{expectation, hermitian_eigen, min_eigenvalue};
use qfilt_core::stats::SampleMoments;
use qfilt_core::{DensityMatrix, FilterTrajectory, HermitianObservable, Scheme};
use rayon::prelude::*;

use crate::config::{OutputKind, Scenario};
use crate::io;
use crate::report::{Check, EnsemblePoint, Report, REPORT_FILE};

pub const SELF_CONSISTENCY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const MIN_EIGENVALUE: f64 = -1e-8;
pub const AGGREGATE_POINTS: usize = 200;
pub const AGGREGATE_FILE: &str = "aggregate.csv";
/// Fewest trajectories for which the ensemble is judged against Lindblad.
pub const ENSEMBLE_MIN_TRAJ: usize = 100;

/// Largest |tr ρ − 1| and smallest eigenvalue over a set of states.
#[derive(Debug, Clone, Copy)]
pub struct Hygiene {
    pub trace_dev: f64,
    pub min_eigenvalue: f64,
}

impl Hygiene {
    pub fn of<'a>(states: impl IntoIterator<Item = &'a DensityMatrix>) -> Self {
        states.into_iter().fold(Hygiene::default(), |h, s| Hygiene {
            trace_dev: h.trace_dev.max((s.matrix().trace().re - 1.0).abs()),
            min_eigenvalue: h.min_eigenvalue.min(min_eigenvalue(s.matrix())),
        })
    }

    fn merge(self, o: Self) -> Self {
        Self { trace_dev: self.trace_dev.max(o.trace_dev), min_eigenvalue: self.min_eigenvalue.min(o.min_eigenvalue) }
    }

    fn checks(self, suite: &str) -> [Check; 2] {
        [
            Check::at_most(suite, "max |tr rho - 1|", TRACE_TOL, self.trace_dev),
            Check::at_least(suite, "min eigenvalue", MIN_EIGENVALUE, self.min_eigenvalue),
        ]
    }
}

impl Default for Hygiene {
    fn default() -> Self {
        Self { trace_dev: 0.0, min_eigenvalue: f64::INFINITY }
    }
}

/// Grid steps at which ensemble statistics are aggregated.
pub fn aggregate_steps(n_steps: usize) -> Vec<usize> {
    let stride = n_steps.div_ceil(AGGREGATE_POINTS).max(1);
    let mut steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if steps.last() != Some(&n_steps) {
        steps.push(n_steps);
    }
    steps
}

struct Summary {
    consistency: f64,
    hygiene: Hygiene,
    samples: Vec<Vec<f64>>,
    variance_slope: f64,
    final_innovation: f64,
}

fn observables(s: &Scenario) -> (Vec<String>, Vec<HermitianObservable>) {
    s.tracked.iter().cloned().unzip()
}

fn write_filter_outputs(s: &Scenario, dir: &Path, index: usize, names: &[String], ft: &FilterTrajectory) -> Result<()> {
    let out = &s.config.outputs;
    if out.wants(OutputKind::States) {
        io::write_states(&io::states_path(dir, index), &ft.grid(), &ft.states)?;
    }
    if out.wants(OutputKind::Moments) && !names.is_empty() {
        io::write_moments(&io::moments_path(dir, index), names, ft)?;
    }
    if out.wants(OutputKind::Innovations) {
        io::write_innovations(&io::innovations_path(dir, index), ft)?;
    }
    Ok(())
}

fn base_report(s: &Scenario, command: &str, n_traj: usize) -> Report {
    let mut r = Report::new(command, s.sim.seed);
    r.config_hash = Some(s.config.hash());
    r.scheme = Some(s.sim.scheme.name().into());
    r.dt = Some(s.sim.dt);
    r.t_max = Some(s.sim.t_max);
    r.n_traj = Some(n_traj);
    r
}

/// Simulates `n_traj` truth trajectories, filters each record and writes the
/// requested outputs plus `report.json` into `out_dir`.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<Report> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let (names, xs) = observables(s);
    let n_traj = s.config.simulation.n_traj;
    let steps = aggregate_steps(s.sim.n_steps());

    let summaries: Vec<Summary> = (0..n_traj)
        .into_par_iter()
        .map(|index| -> Result<Summary> {
            let truth = simulate(&s.model, &s.sim, index as u64).with_context(|| format!("trajectory {index}"))?;
            let ft = run_filter(&s.model, &truth.record, &xs).with_context(|| format!("filtering trajectory {index}"))?;
            let consistency = truth
                .states
                .iter()
                .zip(&ft.states)
                .map(|(a, b)| (a.matrix() - b.matrix()).max_abs())
                .fold(0.0, f64::max);
            if s.config.outputs.wants(OutputKind::Records) {
                io::write_record(&io::record_path(out_dir, index), &truth.record)?;
            }
            write_filter_outputs(s, out_dir, index, &names, &ft)?;
            let stats = innovations_statistics(&ft);
            Ok(Summary {
                consistency,
                hygiene: Hygiene::of(&truth.states).merge(Hygiene::of(&ft.states)),
                samples: ft.moments.iter().map(|m| steps.iter().map(|&k| m[k]).collect()).collect(),
                variance_slope: stats.variance_slope,
                final_innovation: *stats.cumulative.last().unwrap_or(&0.0),
            })
        })
        .collect::<Result<_>>()?;

    let mut report = base_report(s, "simulate", n_traj);
    let consistency = summaries.iter().map(|x| x.consistency).fold(0.0, f64::max);
    report.push(Check::at_most("run", "self-consistency max deviation", SELF_CONSISTENCY_TOL, consistency));
    let hygiene = summaries.iter().fold(Hygiene::default(), |h, x| h.merge(x.hygiene));
    report.extend(hygiene.checks("run"));
    report.extend(innovation_checks(s.sim.scheme, s.sim.n_steps(), &summaries));

    if n_traj >= 2 && !xs.is_empty() {
        let grid: Vec<f64> = steps.iter().map(|&k| k as f64 * s.sim.dt).collect();
        let reference = lindblad_evolve(&s.model, &grid)?;
        let mut table = Vec::new();
        for (j, (name, x)) in names.iter().zip(&xs).enumerate() {
            // Euler steps carry an O(dt) weak error on top of the sampling error.
            let allowance = s.sim.dt * spectral_norm(x);
            let quarters: Vec<usize> = (1..=4).map(|q| grid.len() * q / 4 - 1).collect();
            for (p, &t) in grid.iter().enumerate() {
                let values: Vec<f64> = summaries.iter().map(|x| x.samples[j][p]).collect();
                let m = SampleMoments::from_slice(&values);
                let exact = expectation(&reference[p], x)?;
                let sigmas = if m.std_err() > 0.0 { (m.mean - exact) / m.std_err() } else { 0.0 };
                table.push((t, name.clone(), m.mean, m.std_err(), exact, sigmas));
                if n_traj >= ENSEMBLE_MIN_TRAJ && quarters.contains(&p) {
                    let tol = 3.0 * m.std_err() + allowance;
                    report.push(Check::within("run", format!("ensemble {name} vs lindblad (t = {t})"), exact, m.mean, tol));
                }
            }
        }
        if s.config.outputs.wants(OutputKind::Reports) {
            write_aggregate(&out_dir.join(AGGREGATE_FILE), &names, &table)?;
        }
        report.ensemble = table
            .into_iter()
            .map(|(t, observable, mean, std_err, lindblad, sigmas)| EnsemblePoint { observable, t, mean, std_err, lindblad, sigmas })
            .collect();
    }

    if s.config.outputs.wants(OutputKind::Reports) {
        io::write_json(&out_dir.join(REPORT_FILE), &report)?;
    }
    Ok(report)
}

fn innovation_checks(scheme: Scheme, n_steps: usize, summaries: &[Summary]) -> Vec<Check> {
    let n = summaries.len();
    match scheme {
        Scheme::Homodyne => {
            // Σ ΔI²/T over n steps has variance 2/n per trajectory.
            let slopes: Vec<f64> = summaries.iter().map(|s| s.variance_slope).collect();
            let mean = SampleMoments::from_slice(&slopes).mean;
            let sigma = (2.0 / (n_steps * n) as f64).sqrt();
            vec![Check::within("run", "innovation variance slope", 1.0, mean, 3.0 * sigma)]
        }
        Scheme::Counting if n >= 2 => {
            let finals: Vec<f64> = summaries.iter().map(|s| s.final_innovation).collect();
            let m = SampleMoments::from_slice(&finals);
            vec![Check::within("run", "compensated count mean at T", 0.0, m.mean, 3.0 * m.std_err())]
        }
        Scheme::Counting => Vec::new(),
    }
}

fn spectral_norm(x: &HermitianObservable) -> f64 {
    hermitian_eigen(x.matrix()).values.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
}

fn write_aggregate(path: &Path, names: &[String], table: &[(f64, String, f64, f64, f64, f64)]) -> Result<()> {
    let mut header = vec!["t".to_string()];
    for n in names {
        header.extend([format!("mean_{n}"), format!("stderr_{n}"), format!("lindblad_{n}")]);
    }
    let points = table.len() / names.len().max(1);
    let rows: Vec<(f64, Vec<f64>)> = (0..points)
        .map(|p| {
            let mut row = Vec::with_capacity(3 * names.len());
            for j in 0..names.len() {
                let (_, _, mean, se, exact, _) = &table[j * points + p];
                row.extend([*mean, *se, *exact]);
            }
            (table[p].0, row)
        })
        .collect();
    io::write_table(path, &header, rows.iter().map(|(t, v)| (*t, v.as_slice())))
}

/// Runs the filter over every `traj_*_records.csv` in `records_dir`.
pub fn filter_records(s: &Scenario, records_dir: &Path, out_dir: &Path) -> Result<Report> {
    let files = io::list_records(records_dir)?;
    if files.is_empty() {
        bail!("no traj_*_records.csv files in {}", records_dir.display());
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let (names, xs) = observables(s);

    let summaries: Vec<Summary> = files
        .par_iter()
        .map(|(index, path)| -> Result<Summary> {
            let record = io::read_record(path, s.sim.scheme, s.sim.dt)?;
            let ft = run_filter(&s.model, &record, &xs).with_context(|| format!("filtering {}", path.display()))?;
            write_filter_outputs(s, out_dir, *index, &names, &ft)?;
            let stats = innovations_statistics(&ft);
            Ok(Summary {
                consistency: 0.0,
                hygiene: Hygiene::of(&ft.states),
                samples: Vec::new(),
                variance_slope: stats.variance_slope,
                final_innovation: *stats.cumulative.last().unwrap_or(&0.0),
            })
        })
        .collect::<Result<_>>()?;

    let mut report = base_report(s, "filter", files.len());
    let hygiene = summaries.iter().fold(Hygiene::default(), |h, x| h.merge(x.hygiene));
    report.extend(hygiene.checks("filter"));
    let n_steps = io::read_record(&files[0].1, s.sim.scheme, s.sim.dt)?.n_steps();
    report.extend(innovation_checks(s.sim.scheme, n_steps, &summaries).into_iter().map(|mut c| {
        c.suite = "filter".into();
        c
    }));
    if s.config.outputs.wants(OutputKind::Reports) {
        io::write_json(&out_dir.join(REPORT_FILE), &report)?;
    }
    Ok(report)
}
