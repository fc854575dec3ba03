use std::sync::Arc;

use rayon::prelude::*;

use super::linefit::{extract_line_metrics, LineMetrics, FWHM_PER_SIGMA};
use super::metrics::{estimate_mole_fraction, fit_power_law, mean_std, rmse_masked, PowerLaw, ReconstructedSpectrum};
use crate::error::{Error, Result};
use crate::fourier::HermitianFft;
use crate::io::ResultRow;
use crate::sensing::{sample_set_for, samples_for_rate, EpsilonPolicy, PmfKind, SampleSet, SensingOperator};
use crate::solver::{bpdn_solve, SolverConfig, SolverReport, SolverStatus};
use crate::spectral_model::{
    absorbance_spectrum, add_noise, background_subtract, doppler_width, noise_sigma_for, original_spectrum,
    source_envelope, transmittance, Absorbance, GasScenario, Interferogram, SpectralGrid, Spectrum,
};

/// Comb envelope shape. Unset center and width default to the grid middle
/// and the full grid span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub center_cm1: Option<f64>,
    pub fwhm_cm1: Option<f64>,
    pub peak: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self {
            center_cm1: None,
            fwhm_cm1: None,
            peak: 1.0,
        }
    }
}

impl EnvelopeParams {
    pub fn build(&self, grid: &SpectralGrid) -> Result<Spectrum> {
        let center = self.center_cm1.unwrap_or(0.5 * (grid.nu_min() + grid.nu_max()));
        source_envelope(grid, center, self.fwhm_cm1.unwrap_or(grid.span()), self.peak)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationParams {
    pub envelope: EnvelopeParams,
    /// Spectral SNR; `None` simulates a noiseless measurement.
    pub snr: Option<f64>,
    pub noise_seed: u64,
    /// Envelope fraction below which bins are excluded from every metric.
    pub floor_fraction: f64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            envelope: EnvelopeParams::default(),
            snr: Some(1000.0),
            noise_seed: 1,
            floor_fraction: 0.1,
        }
    }
}

/// A simulated measurement and its full-data (uncompressed) spectrum.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub grid: SpectralGrid,
    pub fft: Arc<HermitianFft>,
    pub envelope: Spectrum,
    pub absorbance: Absorbance,
    /// Noiseless transmittance.
    pub truth: Spectrum,
    pub sample: Interferogram,
    /// Absorption-free reference. It is noise-free: the noise budget set by
    /// the SNR is carried entirely by the sample arm.
    pub reference: Interferogram,
    pub difference: Interferogram,
    pub sigma_t: f64,
    pub floor_fraction: f64,
    /// Transform of the full difference interferogram.
    pub original: ReconstructedSpectrum,
}

pub fn simulate(
    scenario: &GasScenario,
    grid: &SpectralGrid,
    params: &SimulationParams,
    fft: Option<Arc<HermitianFft>>,
) -> Result<Simulation> {
    let fft = match fft {
        Some(f) if f.n_temporal() == grid.n_temporal() => f,
        Some(f) => {
            return Err(Error::LengthMismatch {
                context: "transform length",
                expected: grid.n_temporal(),
                actual: f.n_temporal(),
            })
        }
        None => Arc::new(HermitianFft::new(grid.n_temporal())),
    };
    let envelope = params.envelope.build(grid)?;
    let absorbance = absorbance_spectrum(scenario, grid)?;
    let truth = transmittance(&absorbance.spectrum)?;
    let detected = Spectrum::attenuate(&envelope, &truth)?;
    let clean = Interferogram::synthesize_with(&fft, &detected)?;
    let reference = Interferogram::synthesize_with(&fft, &envelope)?;
    let (sample, sigma_t) = match params.snr {
        Some(snr) => (
            add_noise(&clean, snr, envelope.max(), params.noise_seed)?,
            noise_sigma_for(snr, envelope.max()),
        ),
        None => (clean, 0.0),
    };
    let difference = background_subtract(&sample, &reference)?;
    let x_orig = original_spectrum(&fft, &difference)?;
    let original = ReconstructedSpectrum::new(x_orig, &envelope, params.floor_fraction)?;
    Ok(Simulation {
        grid: *grid,
        fft,
        envelope,
        absorbance,
        truth,
        sample,
        reference,
        difference,
        sigma_t,
        floor_fraction: params.floor_fraction,
        original,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionSettings {
    pub pmf: PmfKind,
    pub epsilon: EpsilonPolicy,
    /// Its `epsilon` field is replaced by the resolved policy value.
    pub solver: SolverConfig,
}

impl Default for ReconstructionSettings {
    fn default() -> Self {
        Self {
            pmf: PmfKind::Sloped,
            epsilon: EpsilonPolicy::Tight,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub spectrum: ReconstructedSpectrum,
    pub report: SolverReport,
    pub samples: SampleSet,
}

impl Reconstruction {
    /// Solves BPDN for a background-subtracted interferogram restricted to
    /// `samples`, with ε from the policy and the known noise level.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        fft: Arc<HermitianFft>,
        difference: &Interferogram,
        envelope: &Spectrum,
        floor_fraction: f64,
        sigma_t: f64,
        samples: SampleSet,
        settings: &ReconstructionSettings,
    ) -> Result<Self> {
        let op = SensingOperator::with_transform(fft, difference.grid, samples)?;
        let y = op.measure(difference)?;
        let epsilon = settings.epsilon.resolve(sigma_t, op.samples().m());
        let cfg = settings.solver.with_epsilon(epsilon);
        let solution = bpdn_solve(&op, &y, &cfg)?;
        Ok(Self {
            spectrum: ReconstructedSpectrum::new(solution.x, envelope, floor_fraction)?,
            report: solution.report,
            samples: op.samples().clone(),
        })
    }
}

pub fn reconstruct(sim: &Simulation, samples: SampleSet, settings: &ReconstructionSettings) -> Result<Reconstruction> {
    Reconstruction::solve(
        sim.fft.clone(),
        &sim.difference,
        &sim.envelope,
        sim.floor_fraction,
        sim.sigma_t,
        samples,
        settings,
    )
}

/// One row of a compression sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr: f64,
    pub rate: f64,
    pub seed_index: usize,
    pub sample_seed: u64,
    pub noise_seed: u64,
    pub m: usize,
    pub rmse: Option<f64>,
    pub mole_fraction_cs: Option<f64>,
    pub mole_fraction_orig: Option<f64>,
    pub status: SolverStatus,
    pub residual_norm: f64,
}

impl SweepRow {
    /// CS estimate over full-data estimate.
    pub fn ratio(&self) -> Option<f64> {
        Some(self.mole_fraction_cs? / self.mole_fraction_orig?)
    }
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoBinsSelected(_)) | Err(Error::FitFailure(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// RMSE and mole-fraction ratio for every `(snr, rate, seed)`. The seed index
/// `i` sets both the noise realization (`noise_seed + i`) and the sampling
/// pattern (`base_seed + i`); all rates of one `(snr, i)` share a
/// simulation.
#[allow(clippy::too_many_arguments)]
pub fn run_compression_sweep(
    scenario: &GasScenario,
    grid: &SpectralGrid,
    params: &SimulationParams,
    snrs: &[f64],
    rates: &[f64],
    seeds: usize,
    base_seed: u64,
    settings: &ReconstructionSettings,
    species: &str,
    depth_threshold: f64,
) -> Result<Vec<SweepRow>> {
    let fft = Arc::new(HermitianFft::new(grid.n_temporal()));
    let template = scenario.unit_absorbance(species, grid)?.spectrum.into_values();
    let ms = rates
        .iter()
        .map(|&r| samples_for_rate(grid.n_temporal(), r))
        .collect::<Result<Vec<_>>>()?;

    let sims: Vec<(f64, usize, Simulation, Option<f64>)> = snrs
        .iter()
        .flat_map(|&snr| (0..seeds).map(move |i| (snr, i)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(snr, i)| {
            let p = SimulationParams {
                snr: Some(snr),
                noise_seed: params.noise_seed.wrapping_add(i as u64),
                ..*params
            };
            let sim = simulate(scenario, grid, &p, Some(fft.clone()))?;
            let q_orig = optional(estimate_mole_fraction(
                &sim.original.transmittance,
                &sim.original.valid,
                &template,
                depth_threshold,
            ))?;
            Ok((snr, i, sim, q_orig))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..sims.len())
        .flat_map(|s| (0..rates.len()).map(move |r| (s, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(s, r)| {
            let (snr, i, sim, q_orig) = &sims[s];
            let seed = base_seed.wrapping_add(*i as u64);
            let samples = sample_set_for(settings.pmf, grid.n_temporal(), ms[r], seed)?;
            let rec = reconstruct(sim, samples, settings)?;
            let t = &rec.spectrum.transmittance;
            Ok(SweepRow {
                snr: *snr,
                rate: rates[r],
                seed_index: *i,
                sample_seed: seed,
                noise_seed: sim.sample.rng_seed.unwrap_or(0),
                m: ms[r],
                rmse: optional(rmse_masked(t, &sim.original.transmittance, &rec.spectrum.valid, depth_threshold))?,
                mole_fraction_cs: optional(estimate_mole_fraction(t, &rec.spectrum.valid, &template, depth_threshold))?,
                mole_fraction_orig: *q_orig,
                status: rec.report.status,
                residual_norm: rec.report.final_residual_norm,
            })
        })
        .collect()
}

/// Medians over seeds for one `(snr, rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub snr: f64,
    pub rate: f64,
    pub runs: usize,
    pub median_rmse: f64,
    pub median_ratio: f64,
    /// Median of `|ratio − 1|`.
    pub median_ratio_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub points: Vec<SweepPoint>,
}

impl SweepSummary {
    pub fn series(&self, snr: f64) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.snr == snr).collect()
    }

    /// Power law through the median RMSE of one SNR series.
    pub fn power_law(&self, snr: f64) -> Result<PowerLaw> {
        let pairs: Vec<(f64, f64)> = self.series(snr).iter().map(|p| (p.rate, p.median_rmse)).collect();
        fit_power_law(&pairs)
    }

    pub fn snrs(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.points {
            if !out.contains(&p.snr) {
                out.push(p.snr);
            }
        }
        out
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Groups rows by `(snr, rate)` in first-appearance order.
pub fn summarize_sweep(rows: &[SweepRow]) -> SweepSummary {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.snr, r.rate)) {
            keys.push((r.snr, r.rate));
        }
    }
    let points = keys
        .into_iter()
        .map(|(snr, rate)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.snr == snr && r.rate == rate).collect();
            let ratios: Vec<f64> = group.iter().filter_map(|r| r.ratio()).collect();
            SweepPoint {
                snr,
                rate,
                runs: group.len(),
                median_rmse: median(group.iter().filter_map(|r| r.rmse).collect()),
                median_ratio: median(ratios.clone()),
                median_ratio_deviation: median(ratios.iter().map(|q| (q - 1.0).abs()).collect()),
            }
        })
        .collect();
    SweepSummary { points }
}

/// The single absorption line followed by the robustness protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetLine {
    pub species: String,
    pub nu0: f64,
    pub half_window: f64,
}

impl TargetLine {
    pub fn window(&self) -> (f64, f64) {
        (self.nu0 - self.half_window, self.nu0 + self.half_window)
    }

    /// Doppler FWHM of the scenario line nearest `nu0`.
    pub fn true_fwhm(&self, scenario: &GasScenario) -> Result<f64> {
        let species = scenario.species_named(&self.species)?;
        let line = species
            .lines
            .iter()
            .min_by(|a, b| (a.nu0 - self.nu0).abs().total_cmp(&(b.nu0 - self.nu0).abs()))
            .ok_or(Error::DegenerateInput("target species has no lines"))?;
        Ok(FWHM_PER_SIGMA * doppler_width(line.nu0, line.molar_mass, scenario.temperature_k()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessCondition {
    pub condition_id: usize,
    pub path_length_m: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub condition: RobustnessCondition,
    pub trial: usize,
    pub seed: u64,
    /// Minimum transmittance in the line window; needs no fit.
    pub peak_t: Option<f64>,
    pub metrics: Option<LineMetrics>,
    pub failure: Option<String>,
    pub mole_fraction: Option<f64>,
    pub rmse: Option<f64>,
    pub status: SolverStatus,
    pub residual_norm: f64,
}

impl TrialRecord {
    pub fn to_row(&self) -> ResultRow {
        ResultRow {
            condition_id: self.condition.condition_id,
            path_length_m: self.condition.path_length_m,
            compression_rate: self.condition.rate,
            trial: self.trial,
            seed: self.seed,
            peak_t: self.peak_t,
            center_cm1: self.metrics.map(|m| m.center),
            fwhm_cm1: self.metrics.map(|m| m.linewidth_fwhm),
            mole_fraction: self.mole_fraction,
            rmse: self.rmse,
            solver_status: self.status.as_str().to_string(),
            residual_norm: self.residual_norm,
        }
    }
}

/// Statistics of one `(path length, rate)` condition over its trials. Peak
/// transmittance uses every trial; center and width only trials whose fit
/// succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessStats {
    pub condition: RobustnessCondition,
    pub trials: usize,
    pub fit_failures: usize,
    pub peak_t_mean: f64,
    pub peak_t_std: f64,
    /// Mean over standard deviation of the peak transmittance.
    pub peak_t_snr: f64,
    /// Mean over standard deviation of the absorption depth `1 − T_peak`.
    pub depth_snr: f64,
    /// Absolute deviation of the fitted center from the true line center.
    pub center_dev_mean: f64,
    pub center_dev_std: f64,
    /// Fitted FWHM over the true Doppler FWHM.
    pub rel_linewidth_mean: f64,
    pub rel_linewidth_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessOutcome {
    pub trials: Vec<TrialRecord>,
    pub stats: Vec<RobustnessStats>,
}

fn ratio(mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        mean / std
    } else {
        f64::INFINITY
    }
}

/// Repeated reconstruct-and-extract over `trials` sampling patterns per
/// `(path length, rate)`; trial `t` uses seed `base_seed + t·seed_stride`.
/// The noise realization is fixed per scenario.
#[allow(clippy::too_many_arguments)]
pub fn run_robustness_protocol(
    base: &GasScenario,
    grid: &SpectralGrid,
    params: &SimulationParams,
    path_lengths: &[f64],
    rates: &[f64],
    trials: usize,
    base_seed: u64,
    seed_stride: u64,
    settings: &ReconstructionSettings,
    target: &TargetLine,
    depth_threshold: f64,
) -> Result<RobustnessOutcome> {
    if trials < 2 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: format!("need at least 2, got {trials}"),
        });
    }
    let fft = Arc::new(HermitianFft::new(grid.n_temporal()));
    let true_fwhm = target.true_fwhm(base)?;
    let template = base.unit_absorbance(&target.species, grid)?.spectrum.into_values();
    let ms = rates
        .iter()
        .map(|&r| samples_for_rate(grid.n_temporal(), r))
        .collect::<Result<Vec<_>>>()?;
    let sims = path_lengths
        .par_iter()
        .map(|&l| simulate(&base.with_path_length(l)?, grid, params, Some(fft.clone())))
        .collect::<Result<Vec<_>>>()?;

    let conditions: Vec<(usize, usize, RobustnessCondition)> = path_lengths
        .iter()
        .enumerate()
        .flat_map(|(p, &l)| rates.iter().enumerate().map(move |(r, &rate)| (p, r, l, rate)))
        .enumerate()
        .map(|(id, (p, r, l, rate))| {
            (
                p,
                r,
                RobustnessCondition {
                    condition_id: id,
                    path_length_m: l,
                    rate,
                },
            )
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..conditions.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let records = jobs
        .into_par_iter()
        .map(|(c, t)| {
            let (p, r, condition) = conditions[c];
            let sim = &sims[p];
            let seed = base_seed.wrapping_add((t as u64).wrapping_mul(seed_stride));
            let samples = sample_set_for(settings.pmf, grid.n_temporal(), ms[r], seed)?;
            let rec = reconstruct(sim, samples, settings)?;
            let spec = &rec.spectrum;
            let (metrics, failure) = match extract_line_metrics(grid, &spec.transmittance, &spec.valid, target.window()) {
                Ok(m) => (Some(m), None),
                Err(e @ (Error::FitFailure(_) | Error::NoBinsSelected(_))) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let peak_t = grid
                .bin_range(target.nu0 - target.half_window, target.nu0 + target.half_window)
                .filter(|&k| spec.valid[k])
                .map(|k| spec.transmittance[k])
                .min_by(f64::total_cmp);
            Ok(TrialRecord {
                condition,
                trial: t,
                seed,
                peak_t,
                metrics,
                failure,
                mole_fraction: optional(estimate_mole_fraction(&spec.transmittance, &spec.valid, &template, depth_threshold))?,
                rmse: optional(rmse_masked(&spec.transmittance, &sim.original.transmittance, &spec.valid, depth_threshold))?,
                status: rec.report.status,
                residual_norm: rec.report.final_residual_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let stats = conditions
        .iter()
        .map(|&(_, _, condition)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|t| t.condition.condition_id == condition.condition_id)
                .collect();
            let fits: Vec<LineMetrics> = group.iter().filter_map(|t| t.metrics).collect();
            let peaks: Vec<f64> = group.iter().filter_map(|t| t.peak_t).collect();
            let depths: Vec<f64> = peaks.iter().map(|t| 1.0 - t).collect();
            let devs: Vec<f64> = fits.iter().map(|m| (m.center - target.nu0).abs()).collect();
            let widths: Vec<f64> = fits.iter().map(|m| m.linewidth_fwhm / true_fwhm).collect();
            let (peak_t_mean, peak_t_std) = mean_std(&peaks);
            let (depth_mean, depth_std) = mean_std(&depths);
            let (center_dev_mean, center_dev_std) = mean_std(&devs);
            let (rel_linewidth_mean, rel_linewidth_std) = mean_std(&widths);
            RobustnessStats {
                condition,
                trials: group.len(),
                fit_failures: group.len() - fits.len(),
                peak_t_mean,
                peak_t_std,
                peak_t_snr: ratio(peak_t_mean, peak_t_std),
                depth_snr: ratio(depth_mean, depth_std),
                center_dev_mean,
                center_dev_std,
                rel_linewidth_mean,
                rel_linewidth_std,
            }
        })
        .collect();
    Ok(RobustnessOutcome { trials: records, stats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesWindow {
    pub species: String,
    pub lo: f64,
    pub hi: f64,
    pub error_std: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ParallelOutcome {
    pub reconstruction: Reconstruction,
    /// Full-data transmittance the reconstruction is compared against.
    pub t_orig: Vec<f64>,
    pub valid: Vec<bool>,
    /// Standard deviation of `T_rec − T_orig` over valid bins.
    pub error_std: f64,
    pub windows: Vec<SpeciesWindow>,
}

fn spread(t_rec: &[f64], t_orig: &[f64], valid: &[bool], bins: impl Iterator<Item = usize>) -> Option<f64> {
    let d: Vec<f64> = bins.filter(|&k| valid[k]).map(|k| t_rec[k] - t_orig[k]).collect();
    if d.len() < 2 {
        None
    } else {
        Some(mean_std(&d).1)
    }
}

/// Reconstructs a multi-species measurement from `m` samples and compares
/// it with the full-data spectrum, globally and around the strongest line of
/// each species (`± zoom_half_width`).
pub fn run_parallel_species_experiment(
    sim: &Simulation,
    scenario: &GasScenario,
    m: usize,
    seed: u64,
    settings: &ReconstructionSettings,
    zoom_half_width: f64,
) -> Result<ParallelOutcome> {
    let grid = &sim.grid;
    let samples = sample_set_for(settings.pmf, grid.n_temporal(), m, seed)?;
    let rec = reconstruct(sim, samples, settings)?;
    let t_rec = &rec.spectrum.transmittance;
    let t_orig = sim.original.transmittance.clone();
    let valid: Vec<bool> = rec.spectrum.valid.iter().zip(&sim.original.valid).map(|(a, b)| *a && *b).collect();
    let error_std = spread(t_rec, &t_orig, &valid, 0..grid.n_spectral())
        .ok_or(Error::NoBinsSelected("valid bins for the error spread"))?;
    let windows = scenario
        .species()
        .iter()
        .map(|s| {
            let inside: Vec<_> = s
                .lines
                .iter()
                .filter(|l| l.nu0 > grid.nu_min() && l.nu0 < grid.nu_max())
                .collect();
            let strongest = inside.iter().max_by(|a, b| a.intensity.total_cmp(&b.intensity));
            let (lo, hi) = strongest.map_or((f64::NAN, f64::NAN), |l| (l.nu0 - zoom_half_width, l.nu0 + zoom_half_width));
            SpeciesWindow {
                species: s.name.clone(),
                lo,
                hi,
                error_std: strongest.and_then(|_| spread(t_rec, &t_orig, &valid, grid.bin_range(lo, hi))),
            }
        })
        .collect();
    Ok(ParallelOutcome {
        reconstruction: rec,
        t_orig,
        valid,
        error_std,
        windows,
    })
}
