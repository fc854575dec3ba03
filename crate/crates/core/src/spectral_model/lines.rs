use serde::{Deserialize, Serialize};

use super::{
    Spectrum, SpectrumKind, SpectralGrid, ATOMIC_MASS_UNIT, BOLTZMANN, SPEED_OF_LIGHT,
};
use crate::error::{Error, Result};

/// Profiles are evaluated out to this many standard deviations; a line whose
/// support would cross a grid edge is skipped.
pub const DOPPLER_CUTOFF_SIGMAS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    /// Line center, cm⁻¹.
    pub nu0: f64,
    /// Integrated line strength, cm⁻¹/(molecule·cm⁻²).
    pub intensity: f64,
    /// Molecular mass, amu.
    pub molar_mass: f64,
}

impl SpectralLine {
    pub fn new(nu0: f64, intensity: f64, molar_mass: f64) -> Result<Self> {
        for (name, v) in [
            ("nu0", nu0),
            ("intensity", intensity),
            ("molar_mass", molar_mass),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        Ok(Self {
            nu0,
            intensity,
            molar_mass,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    pub lines: Vec<SpectralLine>,
    /// Dimensionless mole fraction (42 ppm is `42e-6`).
    pub mole_fraction: f64,
}

/// Physical ground truth of one measurement: gas mixture and cell geometry.
/// The buffer gas is inert and only contributes to the total pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasScenario {
    species: Vec<Species>,
    pressure_pa: f64,
    temperature_k: f64,
    path_length_m: f64,
}

impl GasScenario {
    pub fn new(
        species: Vec<Species>,
        pressure_pa: f64,
        temperature_k: f64,
        path_length_m: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("pressure", pressure_pa),
            ("temperature", temperature_k),
            ("path_length", path_length_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        for (i, s) in species.iter().enumerate() {
            if !(s.mole_fraction > 0.0 && s.mole_fraction < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "mole_fraction",
                    reason: format!("{} has mole fraction {} outside (0, 1)", s.name, s.mole_fraction),
                });
            }
            if species[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidParameter {
                    name: "species",
                    reason: format!("duplicate species `{}`", s.name),
                });
            }
        }
        Ok(Self {
            species,
            pressure_pa,
            temperature_k,
            path_length_m,
        })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_named(&self, name: &str) -> Result<&Species> {
        self.species
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSpecies(name.to_string()))
    }

    pub fn pressure_pa(&self) -> f64 {
        self.pressure_pa
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }

    pub fn path_length_m(&self) -> f64 {
        self.path_length_m
    }

    pub fn with_path_length(&self, path_length_m: f64) -> Result<Self> {
        Self::new(
            self.species.clone(),
            self.pressure_pa,
            self.temperature_k,
            path_length_m,
        )
    }

    pub fn with_mole_fraction(&self, name: &str, mole_fraction: f64) -> Result<Self> {
        self.species_named(name)?;
        let species = self
            .species
            .iter()
            .cloned()
            .map(|mut s| {
                if s.name == name {
                    s.mole_fraction = mole_fraction;
                }
                s
            })
            .collect();
        Self::new(species, self.pressure_pa, self.temperature_k, self.path_length_m)
    }

    /// Absorbance of one species per unit mole fraction: the fixed profile a
    /// single-parameter concentration fit scales.
    pub fn unit_absorbance(&self, name: &str, grid: &SpectralGrid) -> Result<Absorbance> {
        let species = self.species_named(name)?;
        let mut values = vec![0.0; grid.n_spectral()];
        let skipped = self.accumulate(&species.lines, 1.0, grid, &mut values);
        Ok(Absorbance {
            spectrum: Spectrum::new(*grid, values, SpectrumKind::Absorbance)?,
            skipped_lines: skipped,
        })
    }

    fn accumulate(
        &self,
        lines: &[SpectralLine],
        mole_fraction: f64,
        grid: &SpectralGrid,
        out: &mut [f64],
    ) -> usize {
        let column = number_density(mole_fraction, self.pressure_pa, self.temperature_k)
            * self.path_length_m
            * 100.0;
        let mut skipped = 0;
        for line in lines {
            let sigma = doppler_width(line.nu0, line.molar_mass, self.temperature_k);
            let reach = DOPPLER_CUTOFF_SIGMAS * sigma;
            if line.nu0 - reach < grid.nu_min() || line.nu0 + reach > grid.nu_max() {
                skipped += 1;
                continue;
            }
            let norm = line.intensity * column / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            for k in grid.bin_range(line.nu0 - reach, line.nu0 + reach) {
                let d = (grid.wavenumber(k) - line.nu0) / sigma;
                out[k] += norm * (-0.5 * d * d).exp();
            }
        }
        skipped
    }
}

/// Doppler (Gaussian) standard deviation in cm⁻¹:
/// `nu0 * sqrt(k_B T / (m c²))` with `m` the molecular mass.
pub fn doppler_width(nu0: f64, molar_mass_amu: f64, temperature_k: f64) -> f64 {
    let m = molar_mass_amu * ATOMIC_MASS_UNIT;
    nu0 * (BOLTZMANN * temperature_k / (m * SPEED_OF_LIGHT * SPEED_OF_LIGHT)).sqrt()
}

/// Ideal-gas number density in molecules/cm³.
pub fn number_density(mole_fraction: f64, pressure_pa: f64, temperature_k: f64) -> f64 {
    mole_fraction * pressure_pa / (BOLTZMANN * temperature_k) * 1e-6
}

#[derive(Debug, Clone, PartialEq)]
pub struct Absorbance {
    pub spectrum: Spectrum,
    /// Lines whose profile support crossed a grid edge.
    pub skipped_lines: usize,
}

/// Beer-Lambert absorbance `α(ν) = Σ S g(ν − ν0) n L`, summed over species.
/// An empty scenario yields an all-zero absorbance.
pub fn absorbance_spectrum(scenario: &GasScenario, grid: &SpectralGrid) -> Result<Absorbance> {
    let mut values = vec![0.0; grid.n_spectral()];
    let mut skipped = 0;
    for s in &scenario.species {
        skipped += scenario.accumulate(&s.lines, s.mole_fraction, grid, &mut values);
    }
    Ok(Absorbance {
        spectrum: Spectrum::new(*grid, values, SpectrumKind::Absorbance)?,
        skipped_lines: skipped,
    })
}
