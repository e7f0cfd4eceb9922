//! Spectra of Neumann-Poincare type block operators on scaled, normally
//! perturbed core-shell curves, with first-order eigenvalue corrections,
//! Drude resonance frequencies and quasi-static scattering spectra.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod np_spectrum;
pub mod perturbation;
pub mod potentials;
pub mod resonance;
pub mod scattering;

pub use error::{Error, Result};
