//! Compressive measurement model: center-weighted sampling PMF, random index
//! selection, and the partial Fourier operator `A = RΦ` with its adjoint.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::HermitianFft;
use crate::spectral_model::{Interferogram, SpectralGrid};

/// Sampling PMF `C · min{1, 1/|l − N/2|}` over 0-based temporal indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopedPmf {
    weights: Vec<f64>,
    normalization: f64,
}

impl SlopedPmf {
    pub fn new(n_temporal: usize) -> Result<Self> {
        if n_temporal < 2 {
            return Err(Error::InvalidParameter {
                name: "n_temporal",
                reason: format!("need at least 2 points, got {n_temporal}"),
            });
        }
        let raw: Vec<f64> = (0..n_temporal).map(|l| sloped_raw(l, n_temporal)).collect();
        let normalization = 1.0 / raw.iter().sum::<f64>();
        let weights = raw.into_iter().map(|w| w * normalization).collect();
        Ok(Self {
            weights,
            normalization,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The constant `C`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }
}

/// `min{1, 1/|l − N/2|}`; the 1/0 at the exact center is absorbed by the min.
pub fn sloped_raw(l: usize, n: usize) -> f64 {
    let d = (l as f64 - n as f64 / 2.0).abs();
    if d <= 1.0 {
        1.0
    } else {
        1.0 / d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmfKind {
    Sloped,
    Uniform,
    /// Every index retained (`R` is the identity).
    Full,
}

impl PmfKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PmfKind::Sloped => "sloped",
            PmfKind::Uniform => "uniform",
            PmfKind::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sloped" => Some(PmfKind::Sloped),
            "uniform" => Some(PmfKind::Uniform),
            "full" => Some(PmfKind::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pmf {
    Sloped(SlopedPmf),
    Uniform(usize),
}

impl Pmf {
    pub fn for_kind(kind: PmfKind, n_temporal: usize) -> Result<Self> {
        match kind {
            PmfKind::Sloped => Ok(Pmf::Sloped(SlopedPmf::new(n_temporal)?)),
            PmfKind::Uniform | PmfKind::Full => Ok(Pmf::Uniform(n_temporal)),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Pmf::Sloped(p) => p.weights.len(),
            Pmf::Uniform(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> PmfKind {
        match self {
            Pmf::Sloped(_) => PmfKind::Sloped,
            Pmf::Uniform(_) => PmfKind::Uniform,
        }
    }

    fn weight(&self, l: usize) -> f64 {
        match self {
            Pmf::Sloped(p) => p.weights[l],
            Pmf::Uniform(n) => 1.0 / *n as f64,
        }
    }
}

/// Sorted, distinct retained indices `Ω` with the provenance of their draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    indices: Vec<usize>,
    n_temporal: usize,
    pmf: PmfKind,
    seed: u64,
}

impl SampleSet {
    /// Builds a sample set from explicit indices, validating the invariants.
    pub fn from_indices(indices: Vec<usize>, n_temporal: usize, pmf: PmfKind, seed: u64) -> Result<Self> {
        let m = indices.len();
        if m == 0 || m > n_temporal || (m == n_temporal && pmf != PmfKind::Full) {
            return Err(Error::SampleCountOutOfRange { m, n: n_temporal });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices[m - 1] >= n_temporal {
            return Err(Error::InvalidParameter {
                name: "indices",
                reason: "must be strictly increasing and below n_temporal".into(),
            });
        }
        Ok(Self {
            indices,
            n_temporal,
            pmf,
            seed,
        })
    }

    /// Every index: the uncompressed measurement.
    pub fn full(n_temporal: usize) -> Self {
        Self {
            indices: (0..n_temporal).collect(),
            n_temporal,
            pmf: PmfKind::Full,
            seed: 0,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn n_temporal(&self) -> usize {
        self.n_temporal
    }

    pub fn pmf(&self) -> PmfKind {
        self.pmf
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn compression_rate(&self) -> f64 {
        self.n_temporal as f64 / self.m() as f64
    }

    /// `R s`: the retained samples of a full-length signal.
    pub fn restrict(&self, signal: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&l| signal[l]).collect()
    }
}

/// Sample count for a compression rate, `round(N / rate)`.
pub fn samples_for_rate(n_temporal: usize, rate: f64) -> Result<usize> {
    if !(rate >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "rate",
            reason: format!("compression rate must be >= 1, got {rate}"),
        });
    }
    let m = (n_temporal as f64 / rate).round() as usize;
    if m == 0 {
        return Err(Error::SampleCountOutOfRange { m, n: n_temporal });
    }
    Ok(m.min(n_temporal))
}

/// Draws `m` distinct indices by successive weighted draws without
/// replacement (each draw renormalizes over the indices still available).
pub fn draw_sample_set(pmf: &Pmf, m: usize, seed: u64) -> Result<SampleSet> {
    let n = pmf.len();
    if m == 0 || m >= n {
        return Err(Error::SampleCountOutOfRange { m, n });
    }
    let mut tree = SumTree::new((0..n).map(|l| pmf.weight(l)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(m);
    while picked.len() < m {
        let u = rng.random::<f64>() * tree.total();
        let l = tree.find(u);
        if tree.weight(l) > 0.0 {
            tree.set(l, 0.0);
            picked.push(l);
        }
    }
    picked.sort_unstable();
    SampleSet::from_indices(picked, n, pmf.kind(), seed)
}

/// Sample set of size `m` for a PMF kind. `m = N` (or the `Full` kind) gives
/// every index, otherwise `m` indices are drawn with the given seed.
pub fn sample_set_for(kind: PmfKind, n_temporal: usize, m: usize, seed: u64) -> Result<SampleSet> {
    if kind == PmfKind::Full || m == n_temporal {
        if m != n_temporal {
            return Err(Error::SampleCountOutOfRange { m, n: n_temporal });
        }
        return Ok(SampleSet::full(n_temporal));
    }
    draw_sample_set(&Pmf::for_kind(kind, n_temporal)?, m, seed)
}

/// Complete binary tree of partial sums for O(log N) weighted selection and
/// removal. Parents are recomputed from children so no drift accumulates.
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(weights: impl ExactSizeIterator<Item = f64>) -> Self {
        let leaves = weights.len().next_power_of_two();
        let mut nodes = vec![0.0; 2 * leaves];
        for (i, w) in weights.enumerate() {
            nodes[leaves + i] = w;
        }
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { leaves, nodes }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn weight(&self, l: usize) -> f64 {
        self.nodes[self.leaves + l]
    }

    fn set(&mut self, l: usize, w: f64) {
        let mut i = self.leaves + l;
        self.nodes[i] = w;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    fn find(&self, mut u: f64) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let left = self.nodes[2 * i];
            if u < left || self.nodes[2 * i + 1] <= 0.0 {
                i *= 2;
            } else {
                u -= left;
                i = 2 * i + 1;
            }
        }
        i - self.leaves
    }
}

/// A linear map from one-sided complex spectra to real measurements.
///
/// The complex side carries the real inner product `Σ Re(conj(a_k) b_k)`;
/// `adjoint` is exact with respect to it.
pub trait LinearOperator: Sync {
    fn domain_len(&self) -> usize;
    fn range_len(&self) -> usize;
    fn forward(&self, x: &[Complex64], out: &mut [f64]);
    fn adjoint(&self, v: &[f64], out: &mut [Complex64]);
}

/// Matrix-free `A = RΦ`: Hermitian-extended inverse unitary transform
/// followed by restriction to `Ω`.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    grid: SpectralGrid,
    fft: Arc<HermitianFft>,
    samples: SampleSet,
}

impl SensingOperator {
    pub fn new(grid: SpectralGrid, samples: SampleSet) -> Result<Self> {
        Self::with_transform(Arc::new(HermitianFft::new(grid.n_temporal())), grid, samples)
    }

    /// Reuses a planned transform, e.g. across Monte-Carlo trials.
    pub fn with_transform(fft: Arc<HermitianFft>, grid: SpectralGrid, samples: SampleSet) -> Result<Self> {
        if samples.n_temporal() != grid.n_temporal() {
            return Err(Error::LengthMismatch {
                context: "sample set temporal length",
                expected: grid.n_temporal(),
                actual: samples.n_temporal(),
            });
        }
        if fft.n_temporal() != grid.n_temporal() {
            return Err(Error::LengthMismatch {
                context: "transform length",
                expected: grid.n_temporal(),
                actual: fft.n_temporal(),
            });
        }
        Ok(Self { grid, fft, samples })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn transform(&self) -> &Arc<HermitianFft> {
        &self.fft
    }

    /// `y = R Φ x`. Rejects spectra whose DC or Nyquist bin has a
    /// non-negligible imaginary part, which no real signal can carry.
    pub fn apply_forward(&self, x: &[Complex64]) -> Result<Vec<f64>> {
        let n = self.grid.n_spectral();
        if x.len() != n {
            return Err(Error::LengthMismatch {
                context: "forward operand",
                expected: n,
                actual: x.len(),
            });
        }
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let residue = x[0].im.abs().max(x[n - 1].im.abs());
        let limit = 1e-10 * norm;
        if residue > limit {
            return Err(Error::ImaginaryResidue { residue, limit });
        }
        let mut out = vec![0.0; self.samples.m()];
        self.forward(x, &mut out);
        Ok(out)
    }

    pub fn apply_adjoint(&self, v: &[f64]) -> Result<Vec<Complex64>> {
        if v.len() != self.samples.m() {
            return Err(Error::LengthMismatch {
                context: "adjoint operand",
                expected: self.samples.m(),
                actual: v.len(),
            });
        }
        let mut out = vec![Complex64::default(); self.grid.n_spectral()];
        self.adjoint(v, &mut out);
        Ok(out)
    }

    /// Measurement vector `y = R s` from a full interferogram.
    pub fn measure(&self, ifg: &Interferogram) -> Result<Vec<f64>> {
        if ifg.samples.len() != self.grid.n_temporal() {
            return Err(Error::LengthMismatch {
                context: "interferogram to measure",
                expected: self.grid.n_temporal(),
                actual: ifg.samples.len(),
            });
        }
        Ok(self.samples.restrict(&ifg.samples))
    }
}

impl LinearOperator for SensingOperator {
    fn domain_len(&self) -> usize {
        self.grid.n_spectral()
    }

    fn range_len(&self) -> usize {
        self.samples.m()
    }

    fn forward(&self, x: &[Complex64], out: &mut [f64]) {
        let mut full = vec![0.0; self.grid.n_temporal()];
        self.fft.to_time(x, &mut full);
        for (o, &l) in out.iter_mut().zip(self.samples.indices()) {
            *o = full[l];
        }
    }

    fn adjoint(&self, v: &[f64], out: &mut [Complex64]) {
        let mut full = vec![0.0; self.grid.n_temporal()];
        for (&val, &l) in v.iter().zip(self.samples.indices()) {
            full[l] = val;
        }
        self.fft.to_spectrum(&full, out);
        // Interior bins appear twice in the Hermitian extension.
        let last = out.len() - 1;
        for z in &mut out[1..last] {
            *z *= 2.0;
        }
    }
}

/// Noise-derived constraint value for the BPDN problem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "lowercase")]
pub enum EpsilonPolicy {
    /// Expected norm of the retained noise divided by ten.
    #[default]
    Tight,
    /// Expected norm of the retained noise.
    Relaxed,
    Manual(f64),
}

impl EpsilonPolicy {
    /// `E‖R n‖₂ ≈ σ_t √M`, scaled by the policy.
    pub fn resolve(self, sigma_t: f64, m: usize) -> f64 {
        let expected = sigma_t * (m as f64).sqrt();
        match self {
            EpsilonPolicy::Tight => expected / 10.0,
            EpsilonPolicy::Relaxed => expected,
            EpsilonPolicy::Manual(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: Vec<f64>,
    pub epsilon: f64,
}

impl Measurement {
    pub fn new(y: Vec<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be nonnegative, got {epsilon}"),
            });
        }
        Ok(Self { y, epsilon })
    }
}
