//! Scattering coefficients of penetrable high-contrast inclusions in 2D
//! (wavenumber 1), spectra of the radial volume operators, and
//! resonance-enhanced linearised shape inversion.

pub mod geometry;
pub mod inversion;
pub mod layerpot;
pub mod linalg;
pub mod mie;
pub mod quad;
pub mod radialop;
pub mod resonance;
pub mod sensitivity;
pub mod specfun;
pub mod volume;

#[cfg(test)]
pub(crate) mod testutil;

pub use num_complex::Complex64;
