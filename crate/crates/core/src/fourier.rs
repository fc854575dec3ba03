//! Unitary real-signal transform pair shared by the forward model and the
//! sensing operator.
//!
//! A one-sided spectrum of `n/2 + 1` bins is the non-redundant half of a
//! Hermitian length-`n` spectrum. The time-domain signal is the inverse
//! unitary DFT of that Hermitian extension, with a linear phase `(-1)^k`
//! applied so that the zero-delay burst lands on sample `n/2`.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

/// Per-thread transform buffers, reused across calls of any length.
#[derive(Default)]
struct Scratch {
    complex: Vec<Complex64>,
    real: Vec<f64>,
    work: Vec<Complex64>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

#[derive(Clone)]
pub struct HermitianFft {
    n_temporal: usize,
    scale: f64,
    inverse: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn RealToComplex<f64>>,
}

impl fmt::Debug for HermitianFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermitianFft")
            .field("n_temporal", &self.n_temporal)
            .finish()
    }
}

impl HermitianFft {
    /// Plans transforms for an even temporal length `n_temporal >= 2`.
    pub fn new(n_temporal: usize) -> Self {
        assert!(
            n_temporal >= 2 && n_temporal % 2 == 0,
            "temporal length must be even and >= 2"
        );
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            n_temporal,
            scale: 1.0 / (n_temporal as f64).sqrt(),
            inverse: planner.plan_fft_inverse(n_temporal),
            forward: planner.plan_fft_forward(n_temporal),
        }
    }

    pub fn n_temporal(&self) -> usize {
        self.n_temporal
    }

    pub fn n_spectral(&self) -> usize {
        self.n_temporal / 2 + 1
    }

    /// One-sided spectrum to real time signal. The imaginary parts of the DC
    /// and Nyquist bins are ignored; callers validate them beforehand.
    pub fn to_time(&self, spectrum: &[Complex64], out: &mut [f64]) {
        assert_eq!(spectrum.len(), self.n_spectral());
        assert_eq!(out.len(), self.n_temporal);
        SCRATCH.with(|cell| {
            let mut bufs = cell.borrow_mut();
            let Scratch { complex, work, .. } = &mut *bufs;
            complex.clear();
            complex.extend(spectrum.iter().enumerate().map(|(k, &z)| z * (phase(k) * self.scale)));
            let last = complex.len() - 1;
            complex[0].im = 0.0;
            complex[last].im = 0.0;
            work.resize(self.inverse.get_scratch_len(), Complex64::default());
            self.inverse
                .process_with_scratch(complex, out, work)
                .expect("inverse real FFT with validated lengths");
        });
    }

    /// Real time signal to one-sided spectrum; exact inverse of [`to_time`].
    ///
    /// [`to_time`]: HermitianFft::to_time
    pub fn to_spectrum(&self, signal: &[f64], out: &mut [Complex64]) {
        assert_eq!(signal.len(), self.n_temporal);
        assert_eq!(out.len(), self.n_spectral());
        SCRATCH.with(|cell| {
            let mut bufs = cell.borrow_mut();
            let Scratch { real, work, .. } = &mut *bufs;
            real.clear();
            real.extend_from_slice(signal);
            work.resize(self.forward.get_scratch_len(), Complex64::default());
            self.forward
                .process_with_scratch(real, out, work)
                .expect("forward real FFT with validated lengths");
        });
        for (k, z) in out.iter_mut().enumerate() {
            *z *= phase(k) * self.scale;
        }
        let last = out.len() - 1;
        out[0].im = 0.0;
        out[last].im = 0.0;
    }

    /// Multiplicity of bin `k` in the Hermitian extension: 1 for DC and
    /// Nyquist, 2 for interior bins.
    pub fn multiplicity(&self, k: usize) -> f64 {
        if k == 0 || k == self.n_spectral() - 1 {
            1.0
        } else {
            2.0
        }
    }
}

#[inline]
fn phase(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
