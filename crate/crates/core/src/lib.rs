//! Learning matrix-product-state representations of quantum states from
//! randomized single-qubit-basis measurements.
//!
//! The crate is organized around a small number of building blocks:
//!
//! * [`mps`] — complex open-boundary matrix product states: canonical forms,
//!   amplitudes in rotated bases, perfect sampling, expectation values, and
//!   entanglement diagnostics.
//! * [`mpo`] / [`hamiltonians`] / [`lattice`] — matrix product operators and
//!   builders for the surface-code and ruby-lattice Rydberg Hamiltonians.
//! * [`dmrg`] — a two-site ground-state solver used to produce target states.
//! * [`measurement`] — XZ measurement ensembles, dataset generation and
//!   persistence.
//! * [`shadows`] — the random-XZ classical-shadow estimator: measurement
//!   channel, Pauli and subsystem estimation, and exact reconstruction of
//!   real pure states from XZ probabilities.
//! * [`training`] — the maximum-likelihood engine: negative log-likelihood,
//!   analytic conjugate gradients, regularizers, and the SGD → L-BFGS
//!   optimization schedule.
//! * [`evaluation`] — power-law scaling fits, sample-complexity thresholds,
//!   string-operator diagnostics, and consolidated reports.
//!
//! Sites are indexed from 0 throughout.

pub mod dense;
pub mod dmrg;
pub mod error;
pub mod evaluation;
pub mod hamiltonians;
pub mod lattice;
mod linalg;
pub mod measurement;
pub mod mpo;
pub mod mps;
pub mod pauli;
pub mod shadows;
pub mod training;

pub use error::{Error, Result};
pub use measurement::{Dataset, EnsembleKind, EnsembleSpec, MeasurementRecord};
pub use mpo::Mpo;
pub use mps::MpsState;
pub use pauli::{BasisAxis, BasisString, PauliOp, PauliString};
pub use training::{TrainConfig, TrainHistory};

/// Complex scalar used for all tensor data.
pub type C64 = num_complex::Complex64;
