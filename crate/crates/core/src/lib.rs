//! Quaternionic operator calculus for instationary Stokes and Navier–Stokes
//! problems on boxes, cylinders and tori.

pub mod domain;
pub mod kernels;
pub mod lattice;
pub mod potentials;
mod quadrature;
pub mod solver;
mod spectral;
pub mod spinor;
pub mod verify;
pub mod witt_algebra;

pub use spinor::Spinor;
pub use witt_algebra::WittQuaternion;
