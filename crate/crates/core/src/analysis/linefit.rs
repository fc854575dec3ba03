use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::spectral_model::SpectralGrid;

/// `2√(2 ln 2)`: Gaussian FWHM per standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
pub const LINE_FIT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMetrics {
    /// Minimum transmittance in the window.
    pub peak_transmittance: f64,
    pub center: f64,
    pub linewidth_fwhm: f64,
    /// Fitted peak absorbance.
    pub amplitude: f64,
    /// Fitted Gaussian standard deviation.
    pub sigma: f64,
}

impl LineMetrics {
    /// Integrated absorbance of the fitted Gaussian.
    pub fn area(&self) -> f64 {
        self.amplitude * self.sigma * (2.0 * std::f64::consts::PI).sqrt()
    }
}

fn residuals(p: &Vector3<f64>, pts: &[(f64, f64)]) -> f64 {
    pts.iter()
        .map(|&(nu, y)| {
            let d = (nu - p[1]) / p[2];
            let r = y - p[0] * (-0.5 * d * d).exp();
            r * r
        })
        .sum()
}

/// Peak transmittance and a single-Gaussian absorbance fit
/// `−ln T ≈ a·exp(−(ν−c)²/2s²)` over the valid bins of `[nu_lo, nu_hi]`.
///
/// Levenberg-Marquardt, seeded from the discrete minimum, the depth and the
/// second moment of the absorbance.
pub fn extract_line_metrics(
    grid: &SpectralGrid,
    transmittance: &[f64],
    valid: &[bool],
    window: (f64, f64),
) -> Result<LineMetrics> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::InvalidRange(format!("line window [{lo}, {hi}]")));
    }
    if transmittance.len() != grid.n_spectral() || valid.len() != grid.n_spectral() {
        return Err(Error::LengthMismatch {
            context: "line window spectrum",
            expected: grid.n_spectral(),
            actual: transmittance.len().min(valid.len()),
        });
    }
    let bins: Vec<usize> = grid
        .bin_range(lo, hi)
        .filter(|&k| valid[k] && transmittance[k].is_finite())
        .collect();
    if bins.len() < 3 {
        return Err(Error::NoBinsSelected("line window"));
    }
    let (k_min, t_min) = bins
        .iter()
        .map(|&k| (k, transmittance[k]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty window");
    // Non-positive transmittance has no absorbance; such bins are clamped to
    // the deepest representable value for the fit only.
    let floor_t = f64::MIN_POSITIVE.sqrt();
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .map(|&k| (grid.wavenumber(k), -transmittance[k].max(floor_t).ln()))
        .collect();

    let c0 = grid.wavenumber(k_min);
    let a0 = -t_min.max(floor_t).ln();
    let (mut m0, mut m2) = (0.0, 0.0);
    for &(nu, y) in &pts {
        let w = y.max(0.0);
        m0 += w;
        m2 += w * (nu - c0) * (nu - c0);
    }
    let res = grid.resolution();
    let s0 = if m0 > 0.0 { (m2 / m0).sqrt() } else { res };
    let s0 = s0.clamp(0.5 * res, 0.25 * (hi - lo));
    if !(a0 > 0.0) {
        return Err(Error::FitFailure(format!("no absorption in [{lo}, {hi}]")));
    }

    let mut p = Vector3::new(a0, c0, s0);
    let mut cost = residuals(&p, &pts);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..LINE_FIT_MAX_ITERS {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for &(nu, y) in &pts {
            let d = (nu - p[1]) / p[2];
            let g = (-0.5 * d * d).exp();
            let model = p[0] * g;
            let j = Vector3::new(g, model * d / p[2], model * d * d / p[2]);
            jtj += j * j.transpose();
            jtr += j * (y - model);
        }
        let mut stepped = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(delta) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + delta;
            let trial_cost = if trial[2] > 0.0 { residuals(&trial, &pts) } else { f64::INFINITY };
            if trial_cost <= cost {
                let small_step = (0..3).all(|i| delta[i].abs() <= 1e-8 * p[i].abs().max(1e-300));
                let small_gain = cost - trial_cost <= 1e-10 * cost.max(1e-300);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                converged = small_step || small_gain;
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // No damping level lowers the cost: the seed is already a
            // stationary point to working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailure(format!(
            "Gaussian fit did not converge within {LINE_FIT_MAX_ITERS} iterations"
        )));
    }
    let (a, c, s) = (p[0], p[1], p[2].abs());
    if !(a > 0.0) || !(c >= lo && c <= hi) || !s.is_finite() {
        return Err(Error::FitFailure(format!("fit left the window: a={a}, c={c}, s={s}")));
    }
    Ok(LineMetrics {
        peak_transmittance: t_min,
        center: c,
        linewidth_fwhm: FWHM_PER_SIGMA * s,
        amplitude: a,
        sigma: s,
    })
}
