//! Mutual-coupling-aware channel estimation for RIS-aided multi-user
//! mmWave MISO links.
//!
//! The crate is organised bottom-up:
//!
//! * [`array`] builds UPA steering vectors, the geometric channels and noisy
//!   pilot blocks.
//! * [`coupling`] evaluates the thin-wire impedance matrix, the scattering
//!   matrix and the coupled RIS response `(Γ⁻¹ − S)⁻¹`.
//! * [`doa`] is the dimension-reduced subspace AoA estimator (Root-MUSIC and
//!   TLS-ESPRIT).
//! * [`sparse`] holds grid dictionaries, OMP and sparse Bayesian learning.
//! * [`protocol`] chains these into the three-stage estimator and the
//!   baselines.
//! * [`phase`] designs the unit-modulus RIS training matrix on the complex
//!   circle manifold.
//! * [`config`] and [`harness`] drive seeded Monte Carlo sweeps.

pub mod array;
pub mod config;
pub mod coupling;
pub mod csvio;
pub mod doa;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod phase;
pub mod protocol;
pub mod sparse;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
