//! 2D finite-element magnetostatics with reduced magnetic vector potential
//! (RMVP) formulations.
//!
//! Coil windings are modeled as unmeshed line currents whose free-space field
//! enters the finite-element problem either everywhere (original reduced
//! formulation) or only through interface terms on the air/iron boundary
//! (updated formulation). A conventional volumetric solver with meshed
//! winding regions serves as the reference. The `studies` module scripts the
//! convergence, runtime and interface-distance experiments around the three
//! solvers.
//!
//! All quantities are SI: coordinates in m, currents in A, flux density in T,
//! the out-of-plane vector potential component `Az` in T·m.

pub mod biot_savart;
pub mod config;
pub mod error;
pub mod fem;
pub mod formulations;
pub mod materials;
pub mod mesh;
pub mod report;
pub mod runner;
pub mod studies;
pub mod vtk;

pub use error::{Error, Result};
