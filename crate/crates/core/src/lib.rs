//! Quantum-trajectory simulation of a decaying cat state observed by a photon
//! trigger and a balanced homodyne detector.
//!
//! Three independent routes compute the same statistics: the number-basis
//! engine in [`trajectory`], the two-component propagator and charge
//! diffusion in [`closed_forms`], and analytic phase-space references in
//! [`phase_space`] and [`ensemble`].

pub mod closed_forms;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod io;
pub mod numerics;
pub mod phase_space;
pub mod rng;
pub mod stats;
pub mod trajectory;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use fock::{CatParams, FockVector};
pub use trajectory::TrajectoryRecord;
