//! Exact state-vector simulation of the disordered quantum kicked top.
//!
//! * [`hilbert`]: N-qubit states, Walsh-Hadamard and single-qubit kernels.
//! * [`dynamics`]: disorder sampling, phase tables and the Floquet propagator.
//! * [`observables`]: collective spin moments and entanglement entropy.
//! * [`theory`]: closed-form baselines used as oracles.
//! * [`ensemble`]: disorder-ensemble sweeps and their CSV files.
//! * [`scaling`]: finite-size scaling crossings and data collapse.

pub mod cli;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod hilbert;
pub mod observables;
pub mod scaling;
pub mod theory;

pub use error::{Error, Result};
