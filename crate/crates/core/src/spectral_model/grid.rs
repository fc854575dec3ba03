use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform wavenumber axis of `n_spectral` one-sided bins and the paired
/// real time axis of `2 * n_spectral - 2` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    nu_min: f64,
    nu_max: f64,
    n_spectral: usize,
}

impl SpectralGrid {
    pub fn new(nu_min: f64, nu_max: f64, n_spectral: usize) -> Result<Self> {
        if !(nu_min.is_finite() && nu_max.is_finite()) || nu_min <= 0.0 || nu_max <= nu_min {
            return Err(Error::InvalidRange(format!(
                "need 0 < nu_min < nu_max, got [{nu_min}, {nu_max}]"
            )));
        }
        if n_spectral < 2 {
            return Err(Error::InvalidRange(format!(
                "need at least 2 spectral points, got {n_spectral}"
            )));
        }
        Ok(Self {
            nu_min,
            nu_max,
            n_spectral,
        })
    }

    pub fn nu_min(&self) -> f64 {
        self.nu_min
    }

    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    pub fn n_spectral(&self) -> usize {
        self.n_spectral
    }

    pub fn n_temporal(&self) -> usize {
        2 * self.n_spectral - 2
    }

    /// Bin spacing in cm⁻¹.
    pub fn resolution(&self) -> f64 {
        (self.nu_max - self.nu_min) / (self.n_spectral - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.nu_max - self.nu_min
    }

    pub fn wavenumber(&self, k: usize) -> f64 {
        self.nu_min + k as f64 * self.resolution()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_spectral).map(|k| self.wavenumber(k)).collect()
    }

    /// Nearest bin to `nu`, clamped to the grid.
    pub fn nearest_bin(&self, nu: f64) -> usize {
        let k = ((nu - self.nu_min) / self.resolution()).round();
        k.clamp(0.0, (self.n_spectral - 1) as f64) as usize
    }

    /// Inclusive bin range covering `[lo, hi]`, clamped to the grid.
    pub fn bin_range(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let res = self.resolution();
        let first = ((lo - self.nu_min) / res).ceil().max(0.0) as usize;
        let last = ((hi - self.nu_min) / res)
            .floor()
            .min((self.n_spectral - 1) as f64)
            .max(0.0) as usize;
        first..=last
    }
}
