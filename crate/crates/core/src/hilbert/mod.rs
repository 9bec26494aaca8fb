//! Finite-dimensional operator algebra: observables, density matrices and the
//! Lindblad generator pair 𝓛 (Heisenberg picture) / 𝓛† (Schrödinger picture).

mod eigen;
mod matrix;

pub use eigen::{hermitian_eigen, min_eigenvalue, HermitianEigen};
pub use matrix::{pauli, ComplexMatrix, C64};

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;
const IMAG_TRACE_TOL: f64 = 1e-10;

/// A bounded self-adjoint operator on the system space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianObservable(ComplexMatrix);

impl HermitianObservable {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let deviation = matrix.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation });
        }
        Ok(Self(matrix))
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let deviation = matrix.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let lowest = min_eigenvalue(&matrix);
        if lowest < -POSITIVITY_TOL {
            return Err(Error::PositivityViolation { eigenvalue: lowest });
        }
        Ok(Self(matrix))
    }

    /// |ψ⟩⟨ψ| for a state vector that is normalised here.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput("state vector must be nonzero".into()));
        }
        let psi: Vec<C64> = amplitudes.iter().map(|z| z / norm).collect();
        Ok(Self(ComplexMatrix::outer(&psi, &psi)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn purity(&self) -> f64 {
        self.0.trace_product(&self.0).re
    }
}

/// System Hamiltonian, coupling operator and initial state.
///
/// The products L†, L†L and K = −iH − ½L†L are cached, since every filter step needs them.
#[derive(Debug, Clone)]
pub struct SystemModel {
    h: HermitianObservable,
    l: ComplexMatrix,
    rho0: DensityMatrix,
    l_dag: ComplexMatrix,
    l_dag_l: ComplexMatrix,
    drift: ComplexMatrix,
}

impl SystemModel {
    pub fn new(h: HermitianObservable, l: ComplexMatrix, rho0: DensityMatrix) -> Result<Self> {
        let dim = h.dim();
        l.check_same_dim(h.matrix())?;
        if rho0.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: rho0.dim() });
        }
        let l_dag = l.adjoint();
        let l_dag_l = &l_dag * &l;
        let mut drift = h.matrix().scale_complex(C64::new(0.0, -1.0));
        drift.add_scaled(&l_dag_l, -0.5);
        Ok(Self { h, l, rho0, l_dag, l_dag_l, drift })
    }

    pub fn with_initial_state(&self, rho0: DensityMatrix) -> Result<Self> {
        Self::new(self.h.clone(), self.l.clone(), rho0)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianObservable {
        &self.h
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.l
    }

    pub fn coupling_adjoint(&self) -> &ComplexMatrix {
        &self.l_dag
    }

    /// L†L
    pub fn coupling_number(&self) -> &ComplexMatrix {
        &self.l_dag_l
    }

    /// K = −iH − ½L†L, the no-event generator of the conditional evolution.
    pub fn drift(&self) -> &ComplexMatrix {
        &self.drift
    }

    pub fn rho0(&self) -> &DensityMatrix {
        &self.rho0
    }

    /// 𝓛†(ρ) = Kρ + ρK† + LρL†, without dimension checks.
    pub(crate) fn adjoint_generator_raw(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        self.adjoint_generator_parts(rho).0
    }

    /// (𝓛†(ρ), LρL†)
    pub(crate) fn adjoint_generator_parts(&self, rho: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
        let k_rho = &self.drift * rho;
        let jump = &(&self.l * rho) * &self.l_dag;
        let mut out = &k_rho + &k_rho.adjoint();
        out += &jump;
        (out, jump)
    }

    /// tr((L + L†)ρ)
    pub(crate) fn homodyne_mean(&self, rho: &ComplexMatrix) -> f64 {
        2.0 * self.l.trace_product(rho).re
    }

    /// tr(L†Lρ)
    pub(crate) fn emission_rate(&self, rho: &ComplexMatrix) -> f64 {
        self.l_dag_l.trace_product(rho).re
    }
}

/// AB − BA
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_same_dim(b)?;
    Ok(&(a * b) - &(b * a))
}

/// 𝓛_{L,H}(X) = i[H,X] + L†XL − ½(L†L X + X L†L)
pub fn lindblad_generator(m: &SystemModel, x: &HermitianObservable) -> Result<ComplexMatrix> {
    m.coupling().check_same_dim(x.matrix())?;
    Ok(lindblad_generator_raw(m, x.matrix()))
}

pub(crate) fn lindblad_generator_raw(m: &SystemModel, x: &ComplexMatrix) -> ComplexMatrix {
    let k_dag_x = &m.drift().adjoint() * x;
    let mut out = &k_dag_x + &k_dag_x.adjoint();
    out += &(&(m.coupling_adjoint() * x) * m.coupling());
    out
}

/// 𝓛†(ρ) = −i[H,ρ] + LρL† − ½(L†L ρ + ρ L†L)
pub fn adjoint_generator(m: &SystemModel, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    m.coupling().check_same_dim(rho.matrix())?;
    Ok(m.adjoint_generator_raw(rho.matrix()))
}

/// tr(ρX), with the imaginary part checked and discarded.
pub fn expectation(rho: &DensityMatrix, x: &HermitianObservable) -> Result<f64> {
    rho.matrix().check_same_dim(x.matrix())?;
    let z = rho.matrix().trace_product(x.matrix());
    if z.im.abs() > IMAG_TRACE_TOL {
        return Err(Error::NumericalConsistency { imag: z.im });
    }
    Ok(z.re)
}

/// Restores a near-state to a valid density matrix: symmetrize, clip eigenvalues in
/// (−tol, 0) to zero, renormalise the trace.
pub fn repair_state(rho: &ComplexMatrix, tol: f64) -> Result<DensityMatrix> {
    let deviation = rho.hermiticity_deviation();
    if !(deviation < tol) {
        return Err(Error::NonHermitian { deviation });
    }
    let mut sym = rho.hermitian_part();
    let lowest = min_eigenvalue(&sym);
    if !lowest.is_finite() || lowest < -tol {
        return Err(Error::PositivityViolation { eigenvalue: lowest });
    }
    if lowest < 0.0 && sym.dim() == 2 {
        // λ₊ times the projector (A − λ₋I)/(λ₊ − λ₋)
        let highest = sym.trace().re - lowest;
        let gap = highest - lowest;
        if gap > 0.0 {
            let mut top = sym.clone();
            top.add_scaled(&ComplexMatrix::identity(2), -lowest);
            sym = top.scale(highest.max(0.0) / gap);
        } else {
            sym = ComplexMatrix::zeros(2);
        }
    } else if lowest < 0.0 {
        let eig = hermitian_eigen(&sym);
        let clipped: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
        sym = eig.reconstruct(&clipped);
    }
    let trace = sym.trace().re;
    if !(trace >= tol) {
        return Err(Error::DegenerateState { trace });
    }
    Ok(DensityMatrix(sym.scale(1.0 / trace)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pauli::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn decaying_qubit() -> SystemModel {
        SystemModel::new(
            HermitianObservable::new(ComplexMatrix::zeros(2)).unwrap(),
            sigma_minus(),
            DensityMatrix::new(excited()).unwrap(),
        )
        .unwrap()
    }

    fn obs(m: ComplexMatrix) -> HermitianObservable {
        HermitianObservable::new(m).unwrap()
    }

    #[test]
    fn commutator_examples() {
        let zero = ComplexMatrix::zeros(2);
        assert_eq!(commutator(&sigma_x(), &sigma_x()).unwrap(), zero);
        // [σx, σy] by hand: σxσy = iσz, σyσx = −iσz
        let expected = ComplexMatrix::from_row_slice(2, &[c(0., 2.), c(0., 0.), c(0., 0.), c(0., -2.)]).unwrap();
        assert!((&commutator(&sigma_x(), &sigma_y()).unwrap() - &expected).max_abs() < 1e-15);
        let b = ComplexMatrix::from_row_slice(2, &[c(1., 2.), c(3., -1.), c(0.5, 0.), c(-2., 4.)]).unwrap();
        assert_eq!(commutator(&ComplexMatrix::identity(2), &b).unwrap(), zero);
        assert!(matches!(
            commutator(&sigma_x(), &ComplexMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn generator_examples() {
        let h = obs(sigma_x().scale(0.7));
        let closed = SystemModel::new(h.clone(), ComplexMatrix::zeros(2), DensityMatrix::maximally_mixed(2)).unwrap();
        assert!(lindblad_generator(&closed, &h).unwrap().max_abs() < 1e-15);
        let y = obs(sigma_y());
        let expected = commutator(h.matrix(), y.matrix()).unwrap().scale_complex(c(0., 1.));
        assert!((&lindblad_generator(&closed, &y).unwrap() - &expected).max_abs() < 1e-15);

        let m = decaying_qubit();
        assert!(lindblad_generator(&m, &HermitianObservable::identity(2)).unwrap().max_abs() < 1e-15);
        // L†σzL − ½{L†L, σz} = diag(−1, 0) − diag(1, 0)
        let expected = ComplexMatrix::from_real_diagonal(&[-2.0, 0.0]);
        assert!((&lindblad_generator(&m, &obs(sigma_z())).unwrap() - &expected).max_abs() < 1e-15);
        let minus_one_plus_z = (&ComplexMatrix::identity(2) + &sigma_z()).scale(-1.0);
        assert_eq!(expected, minus_one_plus_z);
    }

    #[test]
    fn adjoint_generator_examples() {
        let m = decaying_qubit();
        let out = adjoint_generator(&m, m.rho0()).unwrap();
        assert!((&out - &(&ground() - &excited())).max_abs() < 1e-15);

        let idle = SystemModel::new(
            HermitianObservable::new(ComplexMatrix::zeros(2)).unwrap(),
            ComplexMatrix::zeros(2),
            DensityMatrix::maximally_mixed(2),
        )
        .unwrap();
        assert_eq!(adjoint_generator(&idle, idle.rho0()).unwrap(), ComplexMatrix::zeros(2));
    }

    #[test]
    fn expectation_examples() {
        let plus = DensityMatrix::pure(&[c(1., 0.), c(0., 1.)]).unwrap();
        assert!((expectation(&plus, &HermitianObservable::identity(2)).unwrap() - 1.0).abs() < 1e-15);
        let e = DensityMatrix::new(excited()).unwrap();
        assert_eq!(expectation(&e, &obs(sigma_z())).unwrap(), 1.0);
        assert_eq!(expectation(&DensityMatrix::maximally_mixed(2), &obs(sigma_x())).unwrap(), 0.0);
    }

    #[test]
    fn expectation_rejects_complex_trace() {
        // a non-Hermitian "observable" smuggled past construction
        let bad = HermitianObservable(ComplexMatrix::from_row_slice(2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 0.)]).unwrap());
        let e = DensityMatrix::new(excited()).unwrap();
        assert!(matches!(expectation(&e, &bad), Err(Error::NumericalConsistency { .. })));
    }

    #[test]
    fn repair_examples() {
        let rho = DensityMatrix::pure(&[c(0.6, 0.), c(0., 0.8)]).unwrap();
        let fixed = repair_state(rho.matrix(), 1e-4).unwrap();
        assert!((fixed.matrix() - rho.matrix()).max_abs() < 1e-15);

        let nearly = ComplexMatrix::from_real_diagonal(&[1.000001, -0.000001]);
        let fixed = repair_state(&nearly, 1e-4).unwrap();
        assert!((fixed.matrix() - &ComplexMatrix::from_real_diagonal(&[1.0, 0.0])).max_abs() < 1e-15);

        let broken = ComplexMatrix::from_real_diagonal(&[0.5, -0.5]);
        match repair_state(&broken, 1e-4) {
            Err(Error::PositivityViolation { eigenvalue }) => assert!((eigenvalue + 0.5).abs() < 1e-15),
            other => panic!("expected positivity violation, got {other:?}"),
        }

        assert!(matches!(
            repair_state(&ComplexMatrix::zeros(2), 1e-4),
            Err(Error::DegenerateState { .. })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.5, 0.4])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[1.1, -0.1])).is_err());
        assert!(HermitianObservable::new(sigma_minus()).is_err());
    }

    #[test]
    fn qubit_clip_matches_eigendecomposition() {
        let a = ComplexMatrix::from_row_slice(2, &[c(1.0, 0.0), c(0.1, 0.05), c(0.1, -0.05), c(-0.004, 0.0)]).unwrap();
        let eig = hermitian_eigen(&a);
        assert!(eig.values[0] < 0.0);
        let expected = eig.reconstruct(&[0.0, eig.values[1]]);
        let expected = expected.scale(1.0 / expected.trace().re);
        let repaired = repair_state(&a, 0.05).unwrap();
        assert!((repaired.matrix() - &expected).max_abs() < 1e-12);
        assert!((repaired.purity() - 1.0).abs() < 1e-12);
    }
}
