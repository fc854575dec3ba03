use serde::{Deserialize, Serialize};

use super::SpectralGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    Envelope,
    Transmittance,
    Absorbance,
    /// Background-subtracted amplitude, `envelope * (T - 1)`.
    DifferentialAmplitude,
}

impl SpectrumKind {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumKind::Envelope => "envelope",
            SpectrumKind::Transmittance => "transmittance",
            SpectrumKind::Absorbance => "absorbance",
            SpectrumKind::DifferentialAmplitude => "differential amplitude",
        }
    }
}

/// Real one-sided spectrum sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: SpectralGrid,
    values: Vec<f64>,
    kind: SpectrumKind,
}

impl Spectrum {
    pub fn new(grid: SpectralGrid, values: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if values.len() != grid.n_spectral() {
            return Err(Error::LengthMismatch {
                context: "spectrum values",
                expected: grid.n_spectral(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn expect_kind(&self, kind: SpectrumKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.name(),
                actual: self.kind.name(),
            });
        }
        Ok(())
    }

    /// Elementwise product of an envelope with a transmittance, i.e. the
    /// spectrum reaching the detector.
    pub fn attenuate(envelope: &Spectrum, transmittance: &Spectrum) -> Result<Spectrum> {
        envelope.expect_kind(SpectrumKind::Envelope)?;
        transmittance.expect_kind(SpectrumKind::Transmittance)?;
        if envelope.grid != transmittance.grid {
            return Err(Error::GridMismatch);
        }
        let values = envelope
            .values
            .iter()
            .zip(&transmittance.values)
            .map(|(e, t)| e * t)
            .collect();
        Spectrum::new(envelope.grid, values, SpectrumKind::Envelope)
    }

    /// `envelope * (T - 1)`: the spectrum of a background-subtracted
    /// interferogram.
    pub fn differential(envelope: &Spectrum, transmittance: &Spectrum) -> Result<Spectrum> {
        envelope.expect_kind(SpectrumKind::Envelope)?;
        transmittance.expect_kind(SpectrumKind::Transmittance)?;
        let values = envelope
            .values
            .iter()
            .zip(&transmittance.values)
            .map(|(e, t)| e * (t - 1.0))
            .collect();
        Spectrum::new(envelope.grid, values, SpectrumKind::DifferentialAmplitude)
    }
}

/// `T = exp(-α)` elementwise.
pub fn transmittance(absorbance: &Spectrum) -> Result<Spectrum> {
    absorbance.expect_kind(SpectrumKind::Absorbance)?;
    if let Some(v) = absorbance.values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "absorbance",
            reason: format!("must be nonnegative, found {v}"),
        });
    }
    let values = absorbance.values.iter().map(|a| (-a).exp()).collect();
    Spectrum::new(absorbance.grid, values, SpectrumKind::Transmittance)
}

/// Gaussian comb envelope, `peak * 2^(-4 (ν - c)² / fwhm²)`, with the center
/// snapped to the nearest bin so that bin carries exactly `peak`.
pub fn source_envelope(grid: &SpectralGrid, center: f64, fwhm: f64, peak: f64) -> Result<Spectrum> {
    if !(fwhm.is_finite() && fwhm > 0.0) {
        return Err(Error::InvalidParameter {
            name: "fwhm",
            reason: format!("must be positive, got {fwhm}"),
        });
    }
    let c = grid.wavenumber(grid.nearest_bin(center));
    let values = (0..grid.n_spectral())
        .map(|k| {
            let d = (grid.wavenumber(k) - c) / fwhm;
            peak * (-4.0 * std::f64::consts::LN_2 * d * d).exp()
        })
        .collect();
    Spectrum::new(*grid, values, SpectrumKind::Envelope)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(2000.0, 2100.0, 1025).unwrap()
    }

    #[test]
    fn zero_absorbance_is_unit_transmittance() {
        let a = Spectrum::new(grid(), vec![0.0; 1025], SpectrumKind::Absorbance).unwrap();
        assert!(transmittance(&a).unwrap().values().iter().all(|&t| t == 1.0));
    }

    #[test]
    fn ln2_gives_half() {
        let mut v = vec![0.0; 1025];
        v[10] = std::f64::consts::LN_2;
        let t = transmittance(&Spectrum::new(grid(), v, SpectrumKind::Absorbance).unwrap()).unwrap();
        assert!((t.values()[10] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transmittance_round_trip() {
        let v: Vec<f64> = (0..1025).map(|k| 0.003 * k as f64).collect();
        let t = transmittance(&Spectrum::new(grid(), v.clone(), SpectrumKind::Absorbance).unwrap()).unwrap();
        for (a, t) in v.iter().zip(t.values()) {
            let back = -t.ln();
            assert!((back - a).abs() <= 1e-12 * a.max(1e-300) || (back - a).abs() < 1e-15);
        }
    }

    #[test]
    fn transmittance_rejects_wrong_kind_and_negative() {
        let e = Spectrum::new(grid(), vec![0.0; 1025], SpectrumKind::Envelope).unwrap();
        assert!(matches!(transmittance(&e), Err(Error::KindMismatch { .. })));
        let mut v = vec![0.0; 1025];
        v[3] = -0.1;
        let a = Spectrum::new(grid(), v, SpectrumKind::Absorbance).unwrap();
        assert!(transmittance(&a).is_err());
    }

    #[test]
    fn envelope_edges_match_direct_formula() {
        let g = grid();
        let env = source_envelope(&g, 2050.0, 100.0, 1.0).unwrap();
        // Half the span from center at fwhm = span: 2^(-4 * 0.25) = 0.5.
        assert!((env.values()[0] - 0.5).abs() < 1e-15);
        assert!((env.values()[1024] - 0.5).abs() < 1e-15);
        assert_eq!(env.values()[512], 1.0);
        assert_eq!(env.max(), 1.0);
    }

    #[test]
    fn envelope_is_symmetric_and_scales() {
        let g = grid();
        let env = source_envelope(&g, 2050.0, 30.0, 2.5).unwrap();
        for k in 0..512 {
            assert!((env.values()[k] - env.values()[1024 - k]).abs() < 1e-15);
        }
        let zero = source_envelope(&g, 2050.0, 30.0, 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(source_envelope(&g, 2050.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn length_checked() {
        assert!(Spectrum::new(grid(), vec![0.0; 3], SpectrumKind::Envelope).is_err());
    }
}
