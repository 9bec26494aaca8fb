//! Classical versions of the driving noises.
//!
//! An 𝒩-Gaussian process dZ = α dA + β dA* (plus γ dΛ for the 𝒩-Martingale case) is
//! characterised in the vacuum by its covariance kernel. This module builds those
//! kernels, tests the quantum-Markov factorisation and martingale criteria on a grid,
//! samples the classical versions and evaluates time-ordered moments through chained
//! transition operators.

mod kernel;
pub mod quadrature;
mod sampling;

use std::sync::Arc;

pub use kernel::{time_ordered_moment, transition_apply, KernelFn, MomentSpec, TestFn};
pub use sampling::{
    compensated_counting_path, sample_counting_version, sample_gaussian_version, GaussianSampler, SamplePath,
};

use crate::error::{Error, Result};
use crate::hilbert::C64;

pub type TimeFn<T> = Arc<dyn Fn(f64) -> T + Send + Sync>;

const CLASSICALITY_TOL: f64 = 1e-12;
const CLASSICALITY_GRID: usize = 1000;
const COVARIANCE_QUAD_TOL: f64 = 1e-10;

/// Time-dependent coefficients α, β, γ on [0, horizon].
#[derive(Clone)]
pub struct NoiseCoefficients {
    pub alpha: TimeFn<C64>,
    pub beta: TimeFn<C64>,
    pub gamma: TimeFn<C64>,
    pub horizon: f64,
}

impl NoiseCoefficients {
    pub fn new(alpha: TimeFn<C64>, beta: TimeFn<C64>, gamma: TimeFn<C64>, horizon: f64) -> Self {
        Self { alpha, beta, gamma, horizon }
    }

    pub fn constant(alpha: C64, beta: C64, gamma: C64, horizon: f64) -> Self {
        Self::new(Arc::new(move |_| alpha), Arc::new(move |_| beta), Arc::new(move |_| gamma), horizon)
    }

    /// α = β = 1, γ = 0: the 𝒩-Brownian motion A + A*.
    pub fn brownian(horizon: f64) -> Self {
        Self::constant(C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), horizon)
    }

    /// Checks β = conj(α) and γ real, nonnegative on a uniform grid over the horizon.
    pub fn check_classical(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidInput(format!("horizon {} must be positive", self.horizon)));
        }
        for k in 0..=CLASSICALITY_GRID {
            let t = self.horizon * k as f64 / CLASSICALITY_GRID as f64;
            let (a, b, g) = ((self.alpha)(t), (self.beta)(t), (self.gamma)(t));
            if (b - a.conj()).norm() > CLASSICALITY_TOL {
                return Err(Error::ClassicalityViolation(format!("beta({t}) != conj(alpha({t}))")));
            }
            if g.im.abs() > CLASSICALITY_TOL || g.re < -CLASSICALITY_TOL {
                return Err(Error::ClassicalityViolation(format!("gamma({t}) = {g} is not real nonnegative")));
            }
        }
        Ok(())
    }
}

/// Symmetric covariance kernel c(s, t) on [0, horizon].
#[derive(Clone)]
pub struct CovarianceFunction {
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    horizon: f64,
}

impl CovarianceFunction {
    pub fn new(horizon: f64, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), horizon }
    }

    /// c(s, t) = min(s, t)
    pub fn brownian(horizon: f64) -> Self {
        Self::new(horizon, f64::min)
    }

    /// Stationary Ornstein–Uhlenbeck kernel e^{−|t−s|}.
    pub fn ornstein_uhlenbeck(horizon: f64) -> Self {
        Self::new(horizon, |s, t| (-(t - s).abs()).exp())
    }

    pub fn zero(horizon: f64) -> Self {
        Self::new(horizon, |_, _| 0.0)
    }

    #[inline]
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        (self.f)(s, t)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn gram(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        grid.iter().map(|&s| grid.iter().map(|&t| self.eval(s, t)).collect()).collect()
    }
}

impl std::fmt::Debug for CovarianceFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CovarianceFunction").field("horizon", &self.horizon).finish_non_exhaustive()
    }
}

/// Vacuum covariance of dZ = α dA + β dA*: c(s,t) = ∫₀^{min(s,t)} α(u)β(u) du.
pub fn vacuum_covariance(nc: &NoiseCoefficients) -> Result<CovarianceFunction> {
    nc.check_classical()?;
    let alpha = nc.alpha.clone();
    let beta = nc.beta.clone();
    let density = move |u: f64| (alpha(u) * beta(u)).re;
    Ok(integrated_kernel(nc.horizon, density))
}

/// Covariance of the classical version of dW = dZ + γ dΛ with the gauge part
/// compensated at the given Poisson intensity:
/// c(s,t) = ∫₀^{min(s,t)} (|α(u)|² + λ(u) γ(u)²) du.
pub fn counting_compensated_covariance(nc: &NoiseCoefficients, intensity: TimeFn<f64>) -> Result<CovarianceFunction> {
    nc.check_classical()?;
    let alpha = nc.alpha.clone();
    let gamma = nc.gamma.clone();
    let density = move |u: f64| {
        let g = gamma(u).re;
        alpha(u).norm_sqr() + intensity(u) * g * g
    };
    Ok(integrated_kernel(nc.horizon, density))
}

fn integrated_kernel(horizon: f64, density: impl Fn(f64) -> f64 + Send + Sync + 'static) -> CovarianceFunction {
    CovarianceFunction::new(horizon, move |s, t| {
        quadrature::adaptive_simpson(&density, 0.0, s.min(t), COVARIANCE_QUAD_TOL)
    })
}

/// Quantum-Markov factorisation c(t,s)c(u,u) = c(t,u)c(u,s) for every s ≤ u ≤ t in the grid.
pub fn is_quantum_markov(c: &CovarianceFunction, grid: &[f64], tol: f64) -> bool {
    let n = grid.len();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let (s, u, t) = (grid[i], grid[j], grid[k]);
                let lhs = c.eval(t, s) * c.eval(u, u);
                let rhs = c.eval(t, u) * c.eval(u, s);
                if !((lhs - rhs).abs() <= tol) {
                    return false;
                }
            }
        }
    }
    true
}

/// Martingale criterion c(s,t) = c(s,s) for every s ≤ t in the grid.
pub fn is_martingale_covariance(c: &CovarianceFunction, grid: &[f64], tol: f64) -> bool {
    let n = grid.len();
    (0..n).all(|i| (i..n).all(|j| (c.eval(grid[i], grid[j]) - c.eval(grid[i], grid[i])).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_vacuum_covariance_is_min() {
        let c = vacuum_covariance(&NoiseCoefficients::brownian(2.0)).unwrap();
        assert!((c.eval(0.5, 1.0) - 0.5).abs() < 1e-15);
        for &(s, t) in &[(0.0, 1.0), (0.3, 0.2), (1.7, 1.7), (2.0, 0.9)] {
            assert!((c.eval(s, t) - s.min(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn null_process_has_zero_covariance() {
        let zero = C64::new(0.0, 0.0);
        let c = vacuum_covariance(&NoiseCoefficients::constant(zero, zero, zero, 1.0)).unwrap();
        assert_eq!(c.eval(0.4, 0.9), 0.0);
    }

    #[test]
    fn rotating_phase_keeps_min_kernel() {
        // |e^{iu}|² = 1, so the Itô table dA·dA* = dt gives min(s, t) again.
        let nc = NoiseCoefficients::new(
            Arc::new(|u| C64::new(0.0, u).exp()),
            Arc::new(|u| C64::new(0.0, -u).exp()),
            Arc::new(|_| C64::new(0.0, 0.0)),
            3.0,
        );
        let c = vacuum_covariance(&nc).unwrap();
        for &(s, t) in &[(0.5, 1.0), (2.5, 1.2), (3.0, 3.0)] {
            assert!((c.eval(s, t) - s.min(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn non_self_adjoint_coefficients_rejected() {
        let nc = NoiseCoefficients::constant(C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 0.0), 1.0);
        assert!(matches!(vacuum_covariance(&nc), Err(Error::ClassicalityViolation(_))));
        let nc = NoiseCoefficients::constant(C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0), 1.0);
        assert!(matches!(
            counting_compensated_covariance(&nc, Arc::new(|_| 1.0)),
            Err(Error::ClassicalityViolation(_))
        ));
    }

    #[test]
    fn counting_covariance_reduces_without_gauge() {
        let nc = NoiseCoefficients::new(
            Arc::new(|u| C64::new(1.0 + u, 0.5)),
            Arc::new(|u| C64::new(1.0 + u, -0.5)),
            Arc::new(|_| C64::new(0.0, 0.0)),
            2.0,
        );
        let a = vacuum_covariance(&nc).unwrap();
        let b = counting_compensated_covariance(&nc, Arc::new(|_| 1.0)).unwrap();
        for &(s, t) in &[(0.5, 1.0), (1.5, 1.9)] {
            assert!((a.eval(s, t) - b.eval(s, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn counting_covariance_closed_forms() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let pure_gauge = NoiseCoefficients::constant(zero, zero, one, 1.0);
        let c = counting_compensated_covariance(&pure_gauge, Arc::new(|_| 1.0)).unwrap();
        assert!((c.eval(0.3, 0.8) - 0.3).abs() < 1e-12);
        let both = NoiseCoefficients::constant(one, one, one, 1.0);
        let c = counting_compensated_covariance(&both, Arc::new(|_| 1.0)).unwrap();
        assert!((c.eval(1.0, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn markov_and_martingale_predicates() {
        let bm = CovarianceFunction::brownian(1.0);
        assert!(is_quantum_markov(&bm, &[0.25, 0.5, 1.0], 1e-12));
        assert!(is_martingale_covariance(&bm, &[0.25, 0.5, 1.0], 1e-12));

        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let ou = CovarianceFunction::ornstein_uhlenbeck(1.0);
        assert!(is_quantum_markov(&ou, &grid, 1e-12));
        assert!(!is_martingale_covariance(&ou, &grid, 1e-12));

        assert!(is_martingale_covariance(&CovarianceFunction::zero(1.0), &grid, 0.0));
    }

    /// Brute-force search for a triple s ≤ u ≤ t violating the factorisation.
    fn violating_triple(c: &CovarianceFunction, grid: &[f64]) -> Option<(f64, f64, f64)> {
        for (i, &s) in grid.iter().enumerate() {
            for (j, &u) in grid.iter().enumerate().skip(i) {
                for &t in grid.iter().skip(j) {
                    if (c.eval(t, s) * c.eval(u, u) - c.eval(t, u) * c.eval(u, s)).abs() > 1e-12 {
                        return Some((s, u, t));
                    }
                }
            }
        }
        None
    }

    #[test]
    fn squared_min_kernel_factorises() {
        // c(t,s) = s² for s ≤ t is a product f(s)g(t), so no triple can violate the
        // factorisation; the brute-force search confirms it on the grid.
        let sq = CovarianceFunction::new(1.0, |s: f64, t: f64| s.min(t).powi(2));
        let grid = [0.2, 0.5, 1.0];
        assert_eq!(violating_triple(&sq, &grid), None);
        assert!(is_quantum_markov(&sq, &grid, 1e-12));

        // squared-exponential kernel: e^{-1}·1 vs e^{-1/4}·e^{-1/4} at (0, 0.5, 1)
        let se = CovarianceFunction::new(1.0, |s: f64, t: f64| (-(t - s).powi(2)).exp());
        let grid = [0.0, 0.5, 1.0];
        assert!(violating_triple(&se, &grid).is_some());
        assert!(!is_quantum_markov(&se, &grid, 1e-12));
    }
}
