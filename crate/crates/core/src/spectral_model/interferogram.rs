use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{SpectralGrid, Spectrum};
use crate::error::{Error, Result};
use crate::fourier::HermitianFft;

/// Real time-domain detector signal, optionally carrying the injected noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram {
    pub grid: SpectralGrid,
    pub samples: Vec<f64>,
    pub noise: Option<Vec<f64>>,
    pub rng_seed: Option<u64>,
}

impl Interferogram {
    pub fn new(grid: SpectralGrid, samples: Vec<f64>, noise: Option<Vec<f64>>) -> Result<Self> {
        if samples.len() != grid.n_temporal() {
            return Err(Error::LengthMismatch {
                context: "interferogram samples",
                expected: grid.n_temporal(),
                actual: samples.len(),
            });
        }
        if let Some(n) = &noise {
            if n.len() != samples.len() {
                return Err(Error::LengthMismatch {
                    context: "interferogram noise record",
                    expected: samples.len(),
                    actual: n.len(),
                });
            }
        }
        Ok(Self {
            grid,
            samples,
            noise,
            rng_seed: None,
        })
    }

    /// Time-domain standard deviation of the recorded noise, if any.
    pub fn noise_std(&self) -> Option<f64> {
        self.noise.as_ref().map(|n| {
            let mean = n.iter().sum::<f64>() / n.len() as f64;
            (n.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.len() as f64).sqrt()
        })
    }

    /// Inverse transform of `spectrum` using an already planned transform.
    pub fn synthesize_with(fft: &HermitianFft, spectrum: &Spectrum) -> Result<Self> {
        let grid = *spectrum.grid();
        if fft.n_temporal() != grid.n_temporal() {
            return Err(Error::LengthMismatch {
                context: "transform length",
                expected: grid.n_temporal(),
                actual: fft.n_temporal(),
            });
        }
        let x: Vec<Complex64> = spectrum.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut samples = vec![0.0; grid.n_temporal()];
        fft.to_time(&x, &mut samples);
        Self::new(grid, samples, None)
    }
}

/// Interferogram of a real one-sided spectrum: inverse unitary transform of
/// its Hermitian extension with the burst at sample `n_temporal / 2`.
pub fn synthesize_interferogram(spectrum: &Spectrum, grid: &SpectralGrid) -> Result<Interferogram> {
    if spectrum.values().len() != grid.n_spectral() {
        return Err(Error::LengthMismatch {
            context: "spectrum for synthesis",
            expected: grid.n_spectral(),
            actual: spectrum.values().len(),
        });
    }
    if spectrum.grid() != grid {
        return Err(Error::GridMismatch);
    }
    Interferogram::synthesize_with(&HermitianFft::new(grid.n_temporal()), spectrum)
}

/// One-sided spectrum of a full interferogram (the "original" DCS spectrum).
pub fn original_spectrum(fft: &HermitianFft, ifg: &Interferogram) -> Result<Vec<Complex64>> {
    if fft.n_temporal() != ifg.samples.len() {
        return Err(Error::LengthMismatch {
            context: "transform length",
            expected: ifg.samples.len(),
            actual: fft.n_temporal(),
        });
    }
    let mut out = vec![Complex64::default(); fft.n_spectral()];
    fft.to_spectrum(&ifg.samples, &mut out);
    Ok(out)
}

/// Elementwise `sample - reference`. The sample's noise record is kept.
pub fn background_subtract(sample: &Interferogram, reference: &Interferogram) -> Result<Interferogram> {
    if sample.grid != reference.grid || sample.samples.len() != reference.samples.len() {
        return Err(Error::GridMismatch);
    }
    let samples = sample
        .samples
        .iter()
        .zip(&reference.samples)
        .map(|(a, b)| a - b)
        .collect();
    let noise = match (&sample.noise, &reference.noise) {
        (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x - y).collect()),
        (Some(a), None) => Some(a.clone()),
        (None, Some(b)) => Some(b.iter().map(|v| -v).collect()),
        (None, None) => None,
    };
    let mut out = Interferogram::new(sample.grid, samples, noise)?;
    out.rng_seed = sample.rng_seed.or(reference.rng_seed);
    Ok(out)
}

/// Ratio between the standard deviation of the real part of the unitary
/// spectrum of white noise and its time-domain standard deviation.
///
/// Measured once per process on fixed-seed unit noise rather than taken from
/// a derivation, so the calibration always matches the transform in use.
pub fn noise_spectral_factor() -> f64 {
    static FACTOR: OnceLock<f64> = OnceLock::new();
    *FACTOR.get_or_init(|| {
        const LEN: usize = 1 << 16;
        const ROUNDS: u64 = 8;
        let fft = HermitianFft::new(LEN);
        let mut spec = vec![Complex64::default(); fft.n_spectral()];
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for round in 0..ROUNDS {
            let mut rng = ChaCha8Rng::seed_from_u64(0xCA11_B8A7 ^ round);
            let noise: Vec<f64> = (0..LEN).map(|_| StandardNormal.sample(&mut rng)).collect();
            fft.to_spectrum(&noise, &mut spec);
            for z in &spec[1..spec.len() - 1] {
                sum_sq += z.re * z.re;
                count += 1;
            }
        }
        (sum_sq / count as f64).sqrt()
    })
}

/// Adds i.i.d. Gaussian noise whose spectral real-part standard deviation is
/// `envelope_peak / spectral_snr`. Deterministic in `seed`.
pub fn add_noise(
    ifg: &Interferogram,
    spectral_snr: f64,
    envelope_peak: f64,
    seed: u64,
) -> Result<Interferogram> {
    if !(spectral_snr > 0.0) {
        return Err(Error::InvalidParameter {
            name: "spectral_snr",
            reason: format!("must be positive, got {spectral_snr}"),
        });
    }
    let sigma_t = envelope_peak / spectral_snr / noise_spectral_factor();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fresh: Vec<f64> = (0..ifg.samples.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma_t * z
        })
        .collect();
    let samples = ifg.samples.iter().zip(&fresh).map(|(s, n)| s + n).collect();
    let noise = match &ifg.noise {
        Some(prev) => prev.iter().zip(&fresh).map(|(a, b)| a + b).collect(),
        None => fresh,
    };
    let mut out = Interferogram::new(ifg.grid, samples, Some(noise))?;
    out.rng_seed = Some(seed);
    Ok(out)
}

/// Time-domain noise level implied by a spectral SNR.
pub fn noise_sigma_for(spectral_snr: f64, envelope_peak: f64) -> f64 {
    envelope_peak / spectral_snr / noise_spectral_factor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_model::SpectrumKind;

    fn direct_idft(x: &[f64], n: usize) -> Vec<f64> {
        // O(N²) inverse unitary DFT of the Hermitian extension with (-1)^k.
        let mut ext = vec![Complex64::default(); n];
        for (k, &v) in x.iter().enumerate() {
            let p = if k % 2 == 0 { 1.0 } else { -1.0 };
            ext[k] = Complex64::new(v * p, 0.0);
            if k != 0 && k != n / 2 {
                ext[n - k] = ext[k].conj();
            }
        }
        (0..n)
            .map(|l| {
                let s: Complex64 = (0..n)
                    .map(|k| {
                        ext[k] * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k * l) as f64 / n as f64)
                    })
                    .sum();
                s.re / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn constant_spectrum_gives_centered_delta() {
        let grid = SpectralGrid::new(2000.0, 2010.0, 129).unwrap();
        let s = Spectrum::new(grid, vec![0.7; 129], SpectrumKind::Envelope).unwrap();
        let ifg = synthesize_interferogram(&s, &grid).unwrap();
        let n = grid.n_temporal();
        let peak = ifg.samples[n / 2];
        assert!((peak - 0.7 * (n as f64).sqrt()).abs() < 1e-12);
        for (l, v) in ifg.samples.iter().enumerate() {
            if l != n / 2 {
                assert!(v.abs() <= 1e-10 * peak);
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let grid = SpectralGrid::new(2000.0, 2010.0, 257).unwrap();
        let vals: Vec<f64> = (0..257).map(|k| ((k * 37 % 101) as f64).sin()).collect();
        let ext_energy: f64 = vals
            .iter()
            .enumerate()
            .map(|(k, v)| if k == 0 || k == 256 { v * v } else { 2.0 * v * v })
            .sum();
        let s = Spectrum::new(grid, vals, SpectrumKind::Envelope).unwrap();
        let ifg = synthesize_interferogram(&s, &grid).unwrap();
        let e: f64 = ifg.samples.iter().map(|v| v * v).sum();
        assert!(((e - ext_energy) / ext_energy).abs() < 1e-10);
    }

    #[test]
    fn single_bin_matches_direct_dft() {
        let grid = SpectralGrid::new(2000.0, 2008.0, 9).unwrap();
        for k in 0..9 {
            let mut vals = vec![0.0; 9];
            vals[k] = 1.3;
            let s = Spectrum::new(grid, vals.clone(), SpectrumKind::Envelope).unwrap();
            let ifg = synthesize_interferogram(&s, &grid).unwrap();
            let oracle = direct_idft(&vals, 16);
            for (a, b) in ifg.samples.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "bin {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn hermitian_round_trip() {
        let grid = SpectralGrid::new(2000.0, 2010.0, 513).unwrap();
        let vals: Vec<f64> = (0..513).map(|k| 1.0 + 0.1 * ((k as f64) * 0.37).cos()).collect();
        let s = Spectrum::new(grid, vals.clone(), SpectrumKind::Envelope).unwrap();
        let ifg = synthesize_interferogram(&s, &grid).unwrap();
        let fft = HermitianFft::new(grid.n_temporal());
        let back = original_spectrum(&fft, &ifg).unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert!((b.re - a).abs() < 1e-10 * a.abs());
            assert!(b.im.abs() < 1e-10);
        }
    }

    #[test]
    fn synthesis_checks_length() {
        let grid = SpectralGrid::new(2000.0, 2010.0, 9).unwrap();
        let other = SpectralGrid::new(2000.0, 2010.0, 17).unwrap();
        let s = Spectrum::new(other, vec![1.0; 17], SpectrumKind::Envelope).unwrap();
        assert!(matches!(
            synthesize_interferogram(&s, &grid),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn background_subtraction_identities() {
        let grid = SpectralGrid::new(2000.0, 2008.0, 9).unwrap();
        let a = Interferogram::new(grid, (0..16).map(|v| v as f64).collect(), None).unwrap();
        let zero = background_subtract(&a, &a).unwrap();
        assert!(zero.samples.iter().all(|&v| v == 0.0));
        let z = Interferogram::new(grid, vec![0.0; 16], None).unwrap();
        assert_eq!(background_subtract(&a, &z).unwrap().samples, a.samples);
        let other = Interferogram::new(SpectralGrid::new(2000.0, 2009.0, 9).unwrap(), vec![0.0; 16], None).unwrap();
        assert!(matches!(background_subtract(&a, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn noise_is_deterministic_and_vanishes_at_infinite_snr() {
        let grid = SpectralGrid::new(2000.0, 2010.0, 129).unwrap();
        let a = Interferogram::new(grid, vec![1.0; 256], None).unwrap();
        let n1 = add_noise(&a, 100.0, 1.0, 42).unwrap();
        let n2 = add_noise(&a, 100.0, 1.0, 42).unwrap();
        assert_eq!(n1, n2);
        assert_ne!(n1.samples, add_noise(&a, 100.0, 1.0, 43).unwrap().samples);
        let clean = add_noise(&a, f64::INFINITY, 1.0, 42).unwrap();
        assert_eq!(clean.samples, a.samples);
        assert!(add_noise(&a, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn calibration_factor_is_near_half_power() {
        let f = noise_spectral_factor();
        assert!((f - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01, "{f}");
    }

    #[test]
    fn spectral_noise_level_matches_target() {
        // Monte-Carlo over 32 seeds at n_temporal = 2^14.
        let n = 1 << 14;
        let grid = SpectralGrid::new(2000.0, 2100.0, n / 2 + 1).unwrap();
        let fft = HermitianFft::new(n);
        let zero = Interferogram::new(grid, vec![0.0; n], None).unwrap();
        let target = 1.0 / 500.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..32 {
            let noisy = add_noise(&zero, 500.0, 1.0, 1000 + seed).unwrap();
            let spec = original_spectrum(&fft, &noisy).unwrap();
            for z in &spec[1..spec.len() - 1] {
                sum_sq += z.re * z.re;
                count += 1;
            }
        }
        let measured = (sum_sq / count as f64).sqrt();
        assert!(((measured - target) / target).abs() < 0.03, "{measured} vs {target}");
    }
}
