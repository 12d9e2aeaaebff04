//! Pulse synthesis for locally controlled XY spin chains.
//!
//! The chain Hamiltonian is quadratic in Jordan–Wigner fermions, so
//! evolution is simulated in an `N`-dimensional mode picture (or a
//! `2N`/`2N+1`-dimensional Majorana picture) and checked against an exact
//! dense oracle for small chains.

pub mod chain;
pub mod compile;
pub mod error;
pub mod experiments;
pub mod grape;
pub mod lie;
pub mod linalg;
pub mod oracle;
pub mod propagator;
pub mod targets;

pub use chain::{build_generators, ChainSpec, Disorder, QuadraticGenerators, Representation};
pub use error::{Error, Result};
pub use propagator::{evolve, ControlPulse, ModePropagator};
