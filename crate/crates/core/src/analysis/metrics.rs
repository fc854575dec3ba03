use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral_model::{SpectralGrid, Spectrum, SpectrumKind};

/// A solver output together with the transmittance it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedSpectrum {
    /// Differential amplitude `envelope·(T − 1)`, one-sided.
    pub x: Vec<Complex64>,
    /// `NaN` outside the valid mask.
    pub transmittance: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ReconstructedSpectrum {
    pub fn new(x: Vec<Complex64>, envelope: &Spectrum, floor_fraction: f64) -> Result<Self> {
        let (transmittance, valid) = to_transmittance(&x, envelope, floor_fraction)?;
        Ok(Self {
            x,
            transmittance,
            valid,
        })
    }

    /// RMS of the imaginary part over valid bins. Diagnostic only.
    pub fn imaginary_rms(&self) -> f64 {
        let (sum, n) = self
            .x
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .fold((0.0, 0usize), |(s, n), (z, _)| (s + z.im * z.im, n + 1));
        if n == 0 {
            0.0
        } else {
            (sum / n as f64).sqrt()
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// `T = 1 + Re(x)/envelope` on bins whose envelope reaches
/// `floor_fraction · max(envelope)`; other bins are `NaN` and masked out.
pub fn to_transmittance(
    x: &[Complex64],
    envelope: &Spectrum,
    floor_fraction: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if envelope.kind() != SpectrumKind::Envelope {
        return Err(Error::KindMismatch {
            expected: SpectrumKind::Envelope.name(),
            actual: envelope.kind().name(),
        });
    }
    if !(floor_fraction > 0.0 && floor_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "floor_fraction",
            reason: format!("must lie in (0, 1), got {floor_fraction}"),
        });
    }
    let env = envelope.values();
    if x.len() != env.len() {
        return Err(Error::LengthMismatch {
            context: "spectrum vs envelope",
            expected: env.len(),
            actual: x.len(),
        });
    }
    let floor = floor_fraction * envelope.max();
    let valid: Vec<bool> = env.iter().map(|&e| e > 0.0 && e >= floor).collect();
    let t = x
        .iter()
        .zip(env)
        .zip(&valid)
        .map(|((z, &e), &v)| if v { 1.0 + z.re / e } else { f64::NAN })
        .collect();
    Ok((t, valid))
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            context,
            expected,
            actual,
        })
    }
}

/// Domain of the single-parameter concentration fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitDomain {
    /// Closed-form least squares of `−ln T ≈ q·κ`.
    #[default]
    Absorbance,
    /// Golden-section least squares of `T ≈ exp(−q·κ)`.
    Transmittance,
}

/// Mole fraction from a fixed unit-concentration absorbance template `κ`,
/// fitted over valid bins with absorption depth `1 − T > threshold`.
pub fn estimate_mole_fraction(t_rec: &[f64], valid: &[bool], template: &[f64], threshold: f64) -> Result<f64> {
    estimate_mole_fraction_in(FitDomain::Absorbance, t_rec, valid, template, threshold, None)
}

/// As [`estimate_mole_fraction`], with a choice of fit domain and an
/// optional bin range restriction.
pub fn estimate_mole_fraction_in(
    domain: FitDomain,
    t_rec: &[f64],
    valid: &[bool],
    template: &[f64],
    threshold: f64,
    range: Option<std::ops::RangeInclusive<usize>>,
) -> Result<f64> {
    check_len("valid mask", t_rec.len(), valid.len())?;
    check_len("template", t_rec.len(), template.len())?;
    let range = range.unwrap_or(0..=t_rec.len().saturating_sub(1));
    let bins: Vec<(f64, f64)> = range
        .filter(|&k| k < t_rec.len())
        .filter(|&k| valid[k] && template[k] > 0.0 && t_rec[k] > 0.0 && 1.0 - t_rec[k] > threshold)
        .map(|k| (template[k], t_rec[k]))
        .collect();
    if bins.is_empty() {
        return Err(Error::NoBinsSelected("mole-fraction fit"));
    }
    let (num, den) = bins
        .iter()
        .fold((0.0, 0.0), |(n, d), &(k, t)| (n + k * (-t.ln()), d + k * k));
    let closed_form = num / den;
    match domain {
        FitDomain::Absorbance => Ok(closed_form),
        FitDomain::Transmittance => {
            let cost = |q: f64| {
                bins.iter()
                    .map(|&(k, t)| {
                        let r = t - (-q * k).exp();
                        r * r
                    })
                    .sum::<f64>()
            };
            let hi = 4.0 * closed_form.abs().max(f64::MIN_POSITIVE);
            Ok(golden_section(cost, 0.0, hi, 1e-13))
        }
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// One estimate per line: each fit is restricted to `center ± half_window`.
/// Lines with no selectable bins give `None`.
pub fn estimate_mole_fraction_per_line(
    grid: &SpectralGrid,
    t_rec: &[f64],
    valid: &[bool],
    template: &[f64],
    threshold: f64,
    centers: &[f64],
    half_window: f64,
) -> Result<Vec<Option<f64>>> {
    check_len("transmittance", grid.n_spectral(), t_rec.len())?;
    centers
        .iter()
        .map(|&c| {
            let range = grid.bin_range(c - half_window, c + half_window);
            match estimate_mole_fraction_in(FitDomain::Absorbance, t_rec, valid, template, threshold, Some(range)) {
                Ok(q) => Ok(Some(q)),
                Err(Error::NoBinsSelected(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// RMSE over valid bins whose reference depth `1 − T_orig` exceeds the
/// threshold.
pub fn rmse_masked(t_rec: &[f64], t_orig: &[f64], valid: &[bool], depth_threshold: f64) -> Result<f64> {
    check_len("reference transmittance", t_rec.len(), t_orig.len())?;
    check_len("valid mask", t_rec.len(), valid.len())?;
    let (sum, n) = t_rec
        .iter()
        .zip(t_orig)
        .zip(valid)
        .filter(|((_, &o), &v)| v && 1.0 - o > depth_threshold)
        .fold((0.0, 0usize), |(s, n), ((&r, &o), _)| (s + (r - o) * (r - o), n + 1));
    if n == 0 {
        return Err(Error::NoBinsSelected("rmse mask"));
    }
    Ok((sum / n as f64).sqrt())
}

/// `y = prefactor · r^exponent` fitted by least squares in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerLaw> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateInput("power-law fit needs at least 3 points"));
    }
    if pairs.iter().any(|&(r, y)| !(r > 0.0 && y > 0.0)) {
        return Err(Error::DegenerateInput("power-law fit needs positive values"));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(r, y)| (r.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateInput("power-law fit needs distinct rates"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(PowerLaw {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `NaN` when either
/// side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Mean and sample standard deviation (`n − 1`); the deviation is zero for
/// fewer than two values.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
