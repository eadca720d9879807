//! Numerical laboratory for quantum (Heisenberg–von Neumann) and classical
//! (Liouville) dynamics in phase space, aimed at rough and singular
//! potentials at small semiclassical parameter.
//!
//! The crate is organized around a handful of value types: uniform grids and
//! lattice fields ([`gridcore`]), mixed states as spectral decompositions
//! ([`states`]), a catalog of rough + repulsive-Coulomb potentials
//! ([`potentials`]), split-operator propagation with conservation audits
//! ([`quantum_dynamics`]), Wigner/Husimi transforms and Weyl–Moyal calculus
//! ([`phase_space`]), particle transport along mollified flows
//! ([`classical_dynamics`]), and the measurable residuals, metrics and bound
//! checks that tie the two sides together ([`residuals`]).

pub mod classical_dynamics;
pub mod error;
pub mod fourier;
pub mod gridcore;
pub mod initdata;
pub mod io;
pub mod linalg;
pub mod phase_space;
pub mod potentials;
pub mod quantum_dynamics;
pub mod residuals;
pub mod states;

pub use error::{LabError, Result};

/// Shorthand used throughout for double-precision complex numbers.
pub type C64 = num_complex::Complex64;
