//! Test-only oracles that share no code path with the library transforms.
#![allow(dead_code)]

use std::f64::consts::PI;

use cdcs_core::sensing::LinearOperator;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Explicit `M × 2n` real matrix of `RΦ`, built by the O(N²) direct
/// inverse DFT of the Hermitian extension of each unit coordinate.
pub struct DenseOperator {
    pub n_spectral: usize,
    pub rows: Vec<usize>,
    /// Row-major, `rows.len()` × `2 * n_spectral`; column `2k` is Re x_k,
    /// column `2k + 1` is Im x_k.
    pub matrix: Vec<f64>,
}

impl DenseOperator {
    pub fn new(n_spectral: usize, rows: &[usize]) -> Self {
        let n = 2 * n_spectral - 2;
        let cols = 2 * n_spectral;
        let mut matrix = vec![0.0; rows.len() * cols];
        for k in 0..n_spectral {
            for (part, unit) in [(0, Complex64::new(1.0, 0.0)), (1, Complex64::new(0.0, 1.0))] {
                let column = direct_synthesis(n_spectral, k, unit);
                for (i, &l) in rows.iter().enumerate() {
                    matrix[i * cols + 2 * k + part] = column[l];
                }
            }
        }
        let _ = n;
        Self {
            n_spectral,
            rows: rows.to_vec(),
            matrix,
        }
    }

    fn cols(&self) -> usize {
        2 * self.n_spectral
    }
}

/// Real part of the inverse unitary DFT of the Hermitian extension of a
/// spectrum that is `value` at bin `k` and zero elsewhere, with the `(-1)^k`
/// centering phase. DC and Nyquist keep only their real part.
pub fn direct_synthesis(n_spectral: usize, k: usize, value: Complex64) -> Vec<f64> {
    let n = 2 * n_spectral - 2;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut ext = vec![Complex64::default(); n];
    let v = if k == 0 || k == n_spectral - 1 {
        Complex64::new(value.re, 0.0)
    } else {
        value
    };
    ext[k] = v * sign;
    if k != 0 && k != n / 2 {
        ext[n - k] = (v * sign).conj();
    }
    let terms: Vec<(usize, Complex64)> = ext.into_iter().enumerate().filter(|(_, z)| z.norm() > 0.0).collect();
    (0..n)
        .map(|l| {
            let s: Complex64 = terms
                .iter()
                .map(|&(j, z)| z * Complex64::from_polar(1.0, 2.0 * PI * ((j * l) % n) as f64 / n as f64))
                .sum();
            s.re / (n as f64).sqrt()
        })
        .collect()
}

impl LinearOperator for DenseOperator {
    fn domain_len(&self) -> usize {
        self.n_spectral
    }

    fn range_len(&self) -> usize {
        self.rows.len()
    }

    fn forward(&self, x: &[Complex64], out: &mut [f64]) {
        let cols = self.cols();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[i * cols..(i + 1) * cols];
            *o = x
                .iter()
                .enumerate()
                .map(|(k, z)| row[2 * k] * z.re + row[2 * k + 1] * z.im)
                .sum();
        }
    }

    fn adjoint(&self, v: &[f64], out: &mut [Complex64]) {
        let cols = self.cols();
        out.fill(Complex64::default());
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.matrix[i * cols..(i + 1) * cols];
            for (k, o) in out.iter_mut().enumerate() {
                o.re += row[2 * k] * vi;
                o.im += row[2 * k + 1] * vi;
            }
        }
    }
}

pub fn random_spectrum(n_spectral: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n_spectral)
        .map(|k| {
            let im = if k == 0 || k == n_spectral - 1 {
                0.0
            } else {
                rng.random::<f64>() * 2.0 - 1.0
            };
            Complex64::new(rng.random::<f64>() * 2.0 - 1.0, im)
        })
        .collect()
}

/// `sparsity` random interior bins with unit-scale complex amplitudes.
pub fn sparse_spectrum(n_spectral: usize, sparsity: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![Complex64::default(); n_spectral];
    let mut placed = 0;
    while placed < sparsity {
        let k = rng.random_range(1..n_spectral - 1);
        if x[k].norm() == 0.0 {
            let mag = 0.5 + rng.random::<f64>();
            let phase = rng.random::<f64>() * 2.0 * PI;
            x[k] = Complex64::from_polar(mag, phase);
            placed += 1;
        }
    }
    x
}

pub fn rel_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum();
    let den: f64 = b.iter().map(|q| q.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn real_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.re * q.re + p.im * q.im).sum()
}

/// FISTA on `½‖Ax − y‖² + λ‖x‖₁` with a geometric λ continuation, warm
/// started from stage to stage.
pub fn fista_lambda_sweep<A: LinearOperator>(a: &A, y: &[f64], final_ratio: f64, iters_per_stage: usize) -> Vec<Complex64> {
    let n = a.domain_len();
    let m = a.range_len();
    // Lipschitz constant of the gradient by power iteration on AᵀA.
    let mut v = vec![Complex64::new(1.0, 0.5); n];
    let mut av = vec![0.0; m];
    let mut lip = 0.0;
    for _ in 0..200 {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        a.forward(&v, &mut av);
        a.adjoint(&av, &mut v);
        lip = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    let step = 1.0 / (1.01 * lip);

    let mut aty = vec![Complex64::default(); n];
    a.adjoint(y, &mut aty);
    let lambda0 = aty.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let stages = (final_ratio.ln() / 0.5f64.ln()).ceil() as usize;

    let mut x = vec![Complex64::default(); n];
    let mut z = x.clone();
    let mut grad = vec![Complex64::default(); n];
    let mut r = vec![0.0; m];
    for stage in 0..=stages {
        let lambda = lambda0 * 0.5f64.powi(stage as i32 + 1);
        let mut t = 1.0f64;
        for _ in 0..iters_per_stage {
            a.forward(&z, &mut r);
            r.iter_mut().zip(y).for_each(|(ri, yi)| *ri -= yi);
            a.adjoint(&r, &mut grad);
            let x_old = x.clone();
            for k in 0..n {
                let u = z[k] - step * grad[k];
                let mag = u.norm();
                x[k] = if mag <= step * lambda { Complex64::default() } else { u * ((mag - step * lambda) / mag) };
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            for k in 0..n {
                z[k] = x[k] + (x[k] - x_old[k]) * ((t - 1.0) / t_next);
            }
            t = t_next;
        }
        z.clone_from(&x);
    }
    x
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}
