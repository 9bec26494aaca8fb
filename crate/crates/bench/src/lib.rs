//! Shared fixtures for the benchmarks.

use qfilt_core::hilbert::pauli;
use qfilt_core::{ComplexMatrix, DensityMatrix, HermitianObservable, SystemModel};

/// H = 0, L = σ₋, ρ₀ = |e⟩⟨e|.
pub fn decaying_qubit() -> SystemModel {
    let h = HermitianObservable::new(ComplexMatrix::zeros(2)).expect("zero is Hermitian");
    let rho0 = DensityMatrix::new(pauli::excited()).expect("pure state");
    SystemModel::new(h, pauli::sigma_minus(), rho0).expect("valid model")
}

/// H = 0.7σx, L = 0.8σ₋, ρ₀ = |g⟩⟨g|.
pub fn driven_qubit() -> SystemModel {
    let h = HermitianObservable::new(pauli::sigma_x().scale(0.7)).expect("Hermitian");
    let rho0 = DensityMatrix::new(pauli::ground()).expect("pure state");
    SystemModel::new(h, pauli::sigma_minus().scale(0.8), rho0).expect("valid model")
}

pub fn sigma_z() -> HermitianObservable {
    HermitianObservable::new(pauli::sigma_z()).expect("Hermitian")
}
