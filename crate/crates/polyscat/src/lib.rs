//! Helmholtz scattering by impedance polyhedral obstacles and bi-periodic
//! gratings, together with the corner machinery that certifies vanishing
//! orders of Laplacian eigenfunctions at edge corners.
//!
//! The crate is organized around:
//! - [`specfun`]: associated Legendre / spherical Bessel special functions,
//! - [`geometry`]: polyhedra, grating profiles, corner extraction and
//!   angle rationality classification,
//! - [`eigencorner`]: order-by-order coefficient systems at an edge corner,
//!   vanishing-order certification and spherical-expansion fitting,
//! - [`obstacle`]: exterior scattering solver (method of fundamental
//!   solutions) with far-field evaluation,
//! - [`grating`]: quasi-periodic solver with Rayleigh-spectrum extraction,
//! - [`uniqueness`]: far-field gap experiments, impedance recovery and
//!   theorem-hypothesis audits.

pub mod eigencorner;
pub mod geometry;
pub mod grating;
pub mod linalg;
pub mod obstacle;
pub mod quadrature;
pub mod specfun;
pub mod uniqueness;

pub use num_complex::Complex64;
