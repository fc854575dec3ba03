//! Compressive sampling and sparse reconstruction of dual-comb absorption
//! spectra.
//!
//! The crate covers the whole chain: a Beer-Lambert forward model with
//! Doppler lines ([`spectral_model`]), center-weighted random subsampling and
//! the partial Fourier operator ([`sensing`]), a basis pursuit denoise solver
//! ([`solver`]), fidelity metrics and experiment protocols ([`analysis`]),
//! on-disk formats ([`io`]) and config-driven pipeline commands
//! ([`pipeline`]).

pub mod analysis;
pub mod config;
pub mod error;
pub mod fourier;
pub mod io;
pub mod linelists;
pub mod pipeline;
pub mod sensing;
pub mod solver;
pub mod spectral_model;

pub use error::{Error, Result};
