//! Transition operators K_{s,t} of the Brownian classical version and the chained
//! evaluation of time-ordered moments E[h₁(V_{t₁})···hₙ(V_{tₙ})].

use std::sync::Arc;

use super::quadrature::{hermite64, legendre64};
use super::{is_martingale_covariance, CovarianceFunction};
use crate::error::{Error, Result};

const TAIL_SIGMAS: f64 = 12.0;
const MARTINGALE_TOL: f64 = 1e-9;

/// The bounded test-function family used for moment checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFn {
    /// h(x) = x
    Coordinate,
    /// h(x) = x²
    Square,
    /// h(x) = 1 on [lo, hi], 0 elsewhere. Infinite bounds are allowed.
    Indicator { lo: f64, hi: f64 },
}

impl TestFn {
    pub const ONE: TestFn = TestFn::Indicator { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFn::Coordinate => x,
            TestFn::Square => x * x,
            TestFn::Indicator { lo, hi } => {
                if lo <= x && x <= hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match *self {
            TestFn::Indicator { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }
}

/// A real function together with the interval outside which it vanishes, when it
/// has jumps there. Functions without a support are treated as smooth.
#[derive(Clone)]
pub struct KernelFn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: Option<(f64, f64)>,
}

impl KernelFn {
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// h · g
    fn times(h: TestFn, g: KernelFn) -> KernelFn {
        KernelFn { f: Arc::new(move |x| h.eval(x) * g.eval(x)), support: h.support() }
    }

    /// E[self(x + √var·Z)], Z standard normal.
    fn gaussian_expectation(&self, mean: f64, var: f64) -> f64 {
        if var <= 0.0 {
            return self.eval(mean);
        }
        let sigma = var.sqrt();
        match self.support {
            Some((lo, hi)) => {
                let a = lo.max(mean - TAIL_SIGMAS * sigma);
                let b = hi.min(mean + TAIL_SIGMAS * sigma);
                if a >= b {
                    return 0.0;
                }
                let rule = legendre64();
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&z, &w)| {
                        let y = mid + half * z;
                        let d = (y - mean) / sigma;
                        w * self.eval(y) * norm * (-0.5 * d * d).exp()
                    })
                    .sum::<f64>()
                    * half
            }
            None => {
                let rule = hermite64();
                let spread = (2.0 * var).sqrt();
                rule.nodes.iter().zip(&rule.weights).map(|(&z, &w)| w * self.eval(mean + spread * z)).sum::<f64>()
                    / std::f64::consts::PI.sqrt()
            }
        }
    }
}

impl From<TestFn> for KernelFn {
    fn from(h: TestFn) -> Self {
        KernelFn { f: Arc::new(move |x| h.eval(x)), support: h.support() }
    }
}

impl std::fmt::Debug for KernelFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelFn").field("support", &self.support).finish_non_exhaustive()
    }
}

/// (K_{s,t}h)(x) = ∫ h(y) N(y; x, c(t,t) − c(s,s)) dy.
pub fn transition_apply(h: &KernelFn, s: f64, t: f64, c: &CovarianceFunction) -> Result<KernelFn> {
    if s > t {
        return Err(Error::InvalidKernel(format!("transition requires s <= t, got s = {s}, t = {t}")));
    }
    let var = c.eval(t, t) - c.eval(s, s);
    if var < -MARTINGALE_TOL {
        return Err(Error::InvalidKernel(format!("negative variance increment {var:e} on [{s}, {t}]")));
    }
    if var <= 0.0 {
        return Ok(h.clone());
    }
    let inner = h.clone();
    Ok(KernelFn { f: Arc::new(move |x| inner.gaussian_expectation(x, var)), support: None })
}

/// Ordered epochs with one test function each.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSpec {
    times: Vec<f64>,
    functions: Vec<TestFn>,
}

impl MomentSpec {
    pub fn new(times: Vec<f64>, functions: Vec<TestFn>) -> Result<Self> {
        if times.is_empty() || times.len() != functions.len() {
            return Err(Error::InvalidInput("moment spec needs n >= 1 times with one function each".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidInput("moment times must be finite, nonnegative and ascending".into()));
        }
        Ok(Self { times, functions })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn functions(&self) -> &[TestFn] {
        &self.functions
    }

    /// h₁(v₁)···hₙ(vₙ) for one realisation at the spec's epochs.
    pub fn integrand(&self, values: &[f64]) -> f64 {
        self.functions.iter().zip(values).map(|(h, &v)| h.eval(v)).product()
    }
}

/// E[h₁(X_{t₁})···hₙ(X_{tₙ})] = E[(h₁·K_{t₁,t₂}(h₂·K_{t₂,t₃}(···)))(X_{t₁})].
pub fn time_ordered_moment(spec: &MomentSpec, c: &CovarianceFunction) -> Result<f64> {
    let times = spec.times();
    if !is_martingale_covariance(c, times, MARTINGALE_TOL) {
        return Err(Error::InvalidKernel("covariance is not a martingale kernel on the moment epochs".into()));
    }
    let n = times.len();
    let mut g: KernelFn = spec.functions()[n - 1].into();
    for k in (0..n - 1).rev() {
        let smoothed = transition_apply(&g, times[k], times[k + 1], c)?;
        g = KernelFn::times(spec.functions()[k], smoothed);
    }
    let var0 = c.eval(times[0], times[0]);
    if var0 < -MARTINGALE_TOL {
        return Err(Error::InvalidKernel(format!("negative variance {var0:e} at t = {}", times[0])));
    }
    Ok(g.gaussian_expectation(0.0, var0.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm() -> CovarianceFunction {
        CovarianceFunction::brownian(2.0)
    }

    #[test]
    fn kernel_preserves_coordinate() {
        let k = transition_apply(&TestFn::Coordinate.into(), 0.3, 1.4, &bm()).unwrap();
        for x in [-2.0, -0.1, 0.0, 0.7, 3.0] {
            assert!((k.eval(x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_second_moment() {
        // E[(x + √0.5 Z)²] = x² + 0.5
        let k = transition_apply(&TestFn::Square.into(), 0.5, 1.0, &bm()).unwrap();
        for x in [-1.5, 0.0, 0.4, 2.0] {
            assert!((k.eval(x) - (x * x + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_kernel() {
        let h: KernelFn = TestFn::Indicator { lo: -0.5, hi: 1.0 }.into();
        let k = transition_apply(&h, 0.7, 0.7, &bm()).unwrap();
        for x in [-1.0, -0.5, 0.2, 1.0, 1.2] {
            assert!((k.eval(x) - h.eval(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn indicator_kernel_matches_normal_cdf() {
        // P(x + Z ∈ [0, ∞)) at x = 0 is 1/2; at x = 1 it is Φ(1)
        let k = transition_apply(&TestFn::Indicator { lo: 0.0, hi: f64::INFINITY }.into(), 0.0, 1.0, &bm()).unwrap();
        assert!((k.eval(0.0) - 0.5).abs() < 1e-12);
        assert!((k.eval(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
    }

    #[test]
    fn reversed_times_rejected() {
        assert!(matches!(
            transition_apply(&TestFn::Square.into(), 1.0, 0.5, &bm()),
            Err(Error::InvalidKernel(_))
        ));
    }

    #[test]
    fn moment_examples() {
        let m = |times: Vec<f64>, fs: Vec<TestFn>| time_ordered_moment(&MomentSpec::new(times, fs).unwrap(), &bm()).unwrap();
        assert!((m(vec![1.0], vec![TestFn::Square]) - 1.0).abs() < 1e-12);
        assert!((m(vec![0.5, 1.0], vec![TestFn::Coordinate, TestFn::Coordinate]) - 0.5).abs() < 1e-12);
        assert!(m(vec![0.5, 1.0], vec![TestFn::Coordinate, TestFn::ONE]).abs() < 1e-12);
        // Isserlis: E[a²b²] = E[a²]E[b²] + 2E[ab]² = 0.5 + 0.5
        assert!((m(vec![0.5, 1.0], vec![TestFn::Square, TestFn::Square]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_martingale_kernel_rejected() {
        let spec = MomentSpec::new(vec![0.2, 0.8], vec![TestFn::Coordinate, TestFn::Coordinate]).unwrap();
        assert!(matches!(
            time_ordered_moment(&spec, &CovarianceFunction::ornstein_uhlenbeck(1.0)),
            Err(Error::InvalidKernel(_))
        ));
    }
}
