//! Simulation and validation of two routes from lattice oscillators to
//! kinetic descriptions.
//!
//! * Short-range route: a beam-type lattice wave equation with a quadratic
//!   nonlinearity, written in complex amplitude variables ([`wave`]), whose
//!   ensemble spectrum is compared against a discretized 3-wave kinetic
//!   equation ([`kinetic`]).
//! * Long-range route: a linear chain with fractional (power-law) coupling
//!   ([`chain`]), whose empirical one-site statistics are compared against a
//!   Vlasov-type mean-field equation ([`vlasov`]).
//!
//! [`lattice`] holds the grids, the discrete Fourier pair and the dispersion
//! relations shared by both routes. [`reference`] contains slow direct
//! evaluations used by the oracle suite.

pub mod chain;
pub mod error;
mod fft;
pub mod kinetic;
pub mod lattice;
pub mod reference;
pub mod vlasov;
pub mod wave;

pub use error::{Error, Result};
pub use lattice::{GridField, LatticeSpec, SpectralField};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
