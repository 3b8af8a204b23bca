//! Exact simulation and Fourier spectroscopy of few-atom Rydberg-blockade
//! quantum-Ising systems.
//!
//! The pipeline is: [`geometry`] builds atom arrangements and blockade graphs,
//! [`hamiltonian`] compiles them into dense operators (full van der Waals,
//! edge-truncated, Pauli-form Ising, perfect-blockade PXP), [`spectral`]
//! diagonalizes and enumerates bright transition lines, [`dynamics`] evolves
//! the all-ground return probability `P0(t)` with optional dephasing and
//! readout noise, and [`analysis`] turns `P0(t)` into spectra, peaks and
//! parameter sweeps. [`cli`] wires it all to config files and presets.
//!
//! Units: ħ = 1, angular frequencies in rad/μs, times in μs, lengths in μm.
//! Spectral frequencies are reported in MHz (cycles per μs).

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

/// Converts an angular frequency in rad/μs to MHz.
pub fn rad_per_us_to_mhz(w: f64) -> f64 {
    w / std::f64::consts::TAU
}

/// Converts a frequency in MHz to an angular frequency in rad/μs.
pub fn mhz_to_rad_per_us(f: f64) -> f64 {
    f * std::f64::consts::TAU
}
