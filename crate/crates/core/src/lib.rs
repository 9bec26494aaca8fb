//! Numerical engine for classical versions of quantum stochastic filters.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`]: dense complex matrices, Lindblad generators, density-matrix hygiene.
//! * [`qsc`]: covariance kernels of the driving noises, quantum-Markov and martingale
//!   predicates, samplers for their classical versions and time-ordered moments.
//! * [`dynamics`]: truth simulation of homodyne and photon-counting trajectories.
//! * [`filters`]: the homodyne (Kushner-Stratonovich/Belavkin) and counting filters.
//! * [`oracle`]: derivation-independent references and statistical checks.

pub mod dynamics;
pub mod error;
pub mod filters;
pub mod hilbert;
pub mod oracle;
pub mod qsc;
pub mod rng;
pub mod stats;

pub use dynamics::{MeasurementRecord, Scheme, SimConfig, Trajectory};
pub use error::{Error, Result};
pub use filters::FilterTrajectory;
pub use hilbert::{ComplexMatrix, DensityMatrix, HermitianObservable, SystemModel, C64};
