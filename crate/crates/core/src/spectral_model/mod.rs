//! Forward simulation of background-subtracted absorption interferograms.
//!
//! Absorption lines are pure Doppler Gaussians combined by Beer-Lambert; the
//! source is a Gaussian comb envelope; the interferogram is the unitary
//! inverse transform of the one-sided spectrum with the burst at `n/2`.

mod grid;
mod interferogram;
mod lines;
mod spectrum;

pub use grid::SpectralGrid;
pub use interferogram::{
    add_noise, background_subtract, noise_sigma_for, noise_spectral_factor, original_spectrum,
    synthesize_interferogram, Interferogram,
};
pub use lines::{
    absorbance_spectrum, doppler_width, number_density, Absorbance, GasScenario, Species,
    SpectralLine, DOPPLER_CUTOFF_SIGMAS,
};
pub use spectrum::{source_envelope, transmittance, Spectrum, SpectrumKind};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// HITRAN reference temperature, K.
pub const REFERENCE_TEMPERATURE: f64 = 296.0;
