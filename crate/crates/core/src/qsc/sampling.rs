use rand::Rng;
use rand_distr::StandardNormal;

use super::CovarianceFunction;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

const INDEFINITE_TOL: f64 = 1e-10;
const MAX_STEP_PROBABILITY: f64 = 0.1;

/// A realised path of a classical version on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl SamplePath {
    /// Value at a grid time (exact match required).
    pub fn at(&self, t: f64) -> Option<f64> {
        self.grid.iter().position(|&g| g == t).map(|k| self.values[k])
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    if grid[0] < 0.0 || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("grid times must be finite and nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Mean-zero Gaussian vector with Gram matrix c(grid × grid), drawn through a
/// semidefinite Cholesky factor (zero pivots are allowed, e.g. c(0,0) = 0).
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    grid: Vec<f64>,
    factor: Vec<Vec<f64>>,
}

impl GaussianSampler {
    pub fn new(c: &CovarianceFunction, grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        let gram = c.gram(grid);
        let n = grid.len();
        let scale = (0..n).map(|i| gram[i][i].abs()).fold(1.0_f64, f64::max);
        let mut l = vec![vec![0.0; n]; n];
        for j in 0..n {
            let d = gram[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
            if d < -INDEFINITE_TOL * scale {
                return Err(Error::InvalidCovariance { pivot: d });
            }
            if d <= 1e-14 * scale {
                // zero pivot: the remaining column must vanish as well
                for i in (j + 1)..n {
                    let r = gram[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                    if r.abs() > 1e-8 * scale {
                        return Err(Error::InvalidCovariance { pivot: d });
                    }
                }
                continue;
            }
            let djj = d.sqrt();
            l[j][j] = djj;
            for i in (j + 1)..n {
                let r = gram[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                l[i][j] = r / djj;
            }
        }
        Ok(Self { grid: grid.to_vec(), factor: l })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePath {
        let n = self.grid.len();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let values = self.factor.iter().map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum()).collect();
        SamplePath { grid: self.grid.clone(), values }
    }

    /// Path `index` of the family seeded by `seed`; independent of evaluation order.
    pub fn sample_indexed(&self, seed: u64, index: u64) -> SamplePath {
        self.sample(&mut stream_rng(seed, index))
    }
}

/// One classical-version path of the Gaussian process with covariance `c`.
pub fn sample_gaussian_version(c: &CovarianceFunction, grid: &[f64], seed: u64) -> Result<SamplePath> {
    Ok(GaussianSampler::new(c, grid)?.sample_indexed(seed, 0))
}

/// Counting path N_t of an inhomogeneous Poisson process by per-step Bernoulli
/// thinning with event probability intensity(t_k)·Δt_k.
pub fn sample_counting_version(intensity: &dyn Fn(f64) -> f64, grid: &[f64], seed: u64) -> Result<SamplePath> {
    check_grid(grid)?;
    let probabilities = step_probabilities(intensity, grid)?;
    let mut rng = stream_rng(seed, 0);
    let mut values = Vec::with_capacity(grid.len());
    let mut count = 0.0;
    values.push(count);
    for p in probabilities {
        if rng.random::<f64>() < p {
            count += 1.0;
        }
        values.push(count);
    }
    Ok(SamplePath { grid: grid.to_vec(), values })
}

fn step_probabilities(intensity: &dyn Fn(f64) -> f64, grid: &[f64]) -> Result<Vec<f64>> {
    grid.windows(2)
        .map(|w| {
            let rate = intensity(w[0]);
            if !(rate >= 0.0) {
                return Err(Error::InvalidInput(format!("intensity {rate} at t = {} is negative", w[0])));
            }
            let p = rate * (w[1] - w[0]);
            if p > MAX_STEP_PROBABILITY {
                return Err(Error::StepTooCoarse { probability: p });
            }
            Ok(p)
        })
        .collect()
}

/// N_t − Σ_{t_k < t} intensity(t_k)Δt_k, the exact compensator of the thinned process.
pub fn compensated_counting_path(path: &SamplePath, intensity: &dyn Fn(f64) -> f64) -> SamplePath {
    let mut compensator = 0.0;
    let mut values = Vec::with_capacity(path.values.len());
    values.push(path.values[0]);
    for (k, w) in path.grid.windows(2).enumerate() {
        compensator += intensity(w[0]) * (w[1] - w[0]);
        values.push(path.values[k + 1] - compensator);
    }
    SamplePath { grid: path.grid.clone(), values }
}
