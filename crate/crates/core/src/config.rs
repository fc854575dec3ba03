//! TOML pipeline configuration.
//!
//! Every table rejects unknown keys. A run manifest (`manifest.toml`) embeds
//! the resolved configuration under `[config]` and loads as a configuration
//! itself, which is how runs are reproduced.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{EnvelopeParams, FitDomain, ReconstructionSettings, SimulationParams, TargetLine};
use crate::error::{Error, Result};
use crate::linelists::{self, FULL_NU_MAX, FULL_NU_MIN, FULL_N_SPECTRAL};
use crate::sensing::{samples_for_rate, EpsilonPolicy, PmfKind};
use crate::solver::SolverConfig;
use crate::spectral_model::{GasScenario, SpectralGrid};

/// Largest spectral grid accepted without the full-scale opt-in.
pub const DESK_LIMIT_N_SPECTRAL: usize = 65_536;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nu_min_cm1: f64,
    pub nu_max_cm1: f64,
    pub n_spectral: usize,
    /// Opt-in for grids above the desk limit.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub full_scale: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nu_min_cm1: linelists::DESK_NU_MIN,
            nu_max_cm1: linelists::DESK_NU_MAX,
            n_spectral: linelists::DESK_N_SPECTRAL,
            full_scale: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub name: String,
    pub mole_fraction_ppm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Bundled list name (`demo`, `parallel10`, `fullscale-synthetic`) or a
    /// CSV path, relative paths resolving against the config file.
    pub line_list: String,
    pub pressure_pa: f64,
    pub temperature_k: f64,
    pub path_length_m: f64,
    pub species: Vec<SpeciesConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            line_list: "demo".into(),
            pressure_pa: linelists::CELL_PRESSURE_PA,
            temperature_k: crate::spectral_model::REFERENCE_TEMPERATURE,
            path_length_m: 10.0,
            species: linelists::DEMO_MIXTURE_PPM
                .iter()
                .map(|(n, ppm)| SpeciesConfig {
                    name: (*n).into(),
                    mole_fraction_ppm: *ppm,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_cm1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwhm_cm1: Option<f64>,
    pub peak: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            center_cm1: None,
            fwhm_cm1: None,
            peak: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Peak envelope over the standard deviation of the real part of the
    /// noise spectrum. Absent means noiseless.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            snr: Some(1000.0),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub pmf: PmfKind,
    /// Sample count; exclusive with `rate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Compression rate `N/M`; exclusive with `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            pmf: PmfKind::Sloped,
            m: None,
            rate: Some(10.0),
            seed: 7,
        }
    }
}

impl SamplingConfig {
    pub fn sample_count(&self, n_temporal: usize) -> Result<usize> {
        match (self.m, self.rate) {
            (Some(m), None) => Ok(m),
            (None, Some(rate)) => samples_for_rate(n_temporal, rate),
            _ => Err(Error::Config("sampling: set exactly one of `m` and `rate`".into())),
        }
    }
}

/// [`SolverConfig`] without ε, which comes from the `[epsilon]` policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub optimality_tol: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub nonmonotone_memory: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            max_outer_iters: d.max_outer_iters,
            max_inner_iters: d.max_inner_iters,
            optimality_tol: d.optimality_tol,
            step_min: d.step_min,
            step_max: d.step_max,
            nonmonotone_memory: d.nonmonotone_memory,
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: 0.0,
            max_outer_iters: self.max_outer_iters,
            max_inner_iters: self.max_inner_iters,
            optimality_tol: self.optimality_tol,
            step_min: self.step_min,
            step_max: self.step_max,
            nonmonotone_memory: self.nonmonotone_memory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Bins count as absorbing when `1 − T` exceeds this.
    pub depth_threshold: f64,
    /// Envelope fraction of the peak below which bins are masked.
    pub envelope_floor: f64,
    pub fit_domain: FitDomain,
    pub target_species: String,
    pub line_center_cm1: f64,
    pub line_half_window_cm1: f64,
    /// Half width of the per-species comparison windows.
    pub zoom_half_width_cm1: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            depth_threshold: 0.01,
            envelope_floor: 0.1,
            fit_domain: FitDomain::Absorbance,
            target_species: "N2O".into(),
            line_center_cm1: 2238.36,
            line_half_window_cm1: 0.05,
            zoom_half_width_cm1: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub snrs: Vec<f64>,
    pub rates: Vec<f64>,
    pub seeds: usize,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snrs: vec![1000.0, 500.0, 100.0],
            rates: vec![2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            seeds: 10,
            base_seed: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub path_lengths_m: Vec<f64>,
    pub rates: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Seed increment between trials; 0 repeats one sampling pattern.
    pub seed_stride: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            path_lengths_m: vec![76.0, 11.4, 1.67, 0.76, 0.15],
            rates: vec![5.0, 20.0, 80.0],
            trials: 20,
            base_seed: 1000,
            seed_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Background-subtracted interferogram for `reconstruct`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interferogram: Option<PathBuf>,
    /// Sample set for `reconstruct`; drawn from `[sampling]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    /// Spectrum CSV for `analyze`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub grid: GridConfig,
    pub scenario: ScenarioConfig,
    pub envelope: EnvelopeConfig,
    pub noise: NoiseConfig,
    pub sampling: SamplingConfig,
    pub epsilon: EpsilonPolicy,
    pub solver: SolverSection,
    pub analysis: AnalysisConfig,
    pub sweep: SweepConfig,
    pub montecarlo: MonteCarloConfig,
    pub input: InputConfig,
    pub output: OutputConfig,
}

#[derive(Deserialize)]
struct ManifestView {
    config: PipelineConfig,
}

impl PipelineConfig {
    /// Parses a configuration, or the `[config]` table of a run manifest.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let cfg = if value.contains_key("config") && value.contains_key("run") {
            toml::from_str::<ManifestView>(text).map(|m| m.config)
        } else {
            toml::from_str::<PipelineConfig>(text)
        };
        cfg.map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Loads a file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            let joined = if p.is_relative() { base.join(&*p) } else { p.clone() };
            *p = std::path::absolute(&joined).unwrap_or(joined);
        };
        if linelists::bundled_text(&self.scenario.line_list).is_none() {
            let mut p = PathBuf::from(&self.scenario.line_list);
            fix(&mut p);
            self.scenario.line_list = p.to_string_lossy().into_owned();
        }
        for p in [&mut self.input.interferogram, &mut self.input.samples, &mut self.input.spectrum]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Switches to the full-scale grid and its synthetic line list, unless
    /// a file-based line list is configured.
    pub fn make_full_scale(&mut self) {
        self.grid = GridConfig {
            nu_min_cm1: FULL_NU_MIN,
            nu_max_cm1: FULL_NU_MAX,
            n_spectral: FULL_N_SPECTRAL,
            full_scale: true,
        };
        if linelists::bundled_text(&self.scenario.line_list).is_some() {
            self.scenario.line_list = "fullscale-synthetic".into();
        }
    }

    /// Seeds set from the command line: sampling pattern and protocol bases.
    pub fn override_seed(&mut self, seed: u64) {
        self.sampling.seed = seed;
        self.sweep.base_seed = seed;
        self.montecarlo.base_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.grid.n_spectral > DESK_LIMIT_N_SPECTRAL && !self.grid.full_scale {
            return cfg(format!(
                "grid.n_spectral = {} exceeds the desk limit {DESK_LIMIT_N_SPECTRAL}; pass --full-scale",
                self.grid.n_spectral
            ));
        }
        for (key, seed) in [
            ("noise.seed", self.noise.seed),
            ("sampling.seed", self.sampling.seed),
            ("sweep.base_seed", self.sweep.base_seed),
            ("montecarlo.base_seed", self.montecarlo.base_seed),
        ] {
            if seed > i64::MAX as u64 {
                return cfg(format!("{key} must not exceed {}", i64::MAX));
            }
        }
        if let Some(snr) = self.noise.snr {
            if !(snr > 0.0) {
                return cfg(format!("noise.snr must be positive, got {snr}"));
            }
        }
        if self.sampling.m.is_some() == self.sampling.rate.is_some() {
            return cfg("sampling: set exactly one of `m` and `rate`".into());
        }
        if !(self.analysis.envelope_floor > 0.0 && self.analysis.envelope_floor < 1.0) {
            return cfg("analysis.envelope_floor must lie in (0, 1)".into());
        }
        if !(self.analysis.line_half_window_cm1 > 0.0 && self.analysis.zoom_half_width_cm1 > 0.0) {
            return cfg("analysis half windows must be positive".into());
        }
        if self.scenario.species.is_empty() {
            return cfg("scenario.species must list at least one species".into());
        }
        self.solver.to_solver_config().validate()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.grid.nu_min_cm1, self.grid.nu_max_cm1, self.grid.n_spectral)
    }

    pub fn scenario(&self) -> Result<GasScenario> {
        let table = linelists::load(&self.scenario.line_list)?;
        let mixture: Vec<(&str, f64)> = self
            .scenario
            .species
            .iter()
            .map(|s| (s.name.as_str(), s.mole_fraction_ppm))
            .collect();
        linelists::scenario_from(
            &table,
            &mixture,
            self.scenario.pressure_pa,
            self.scenario.temperature_k,
            self.scenario.path_length_m,
        )
    }

    pub fn simulation_params(&self) -> SimulationParams {
        SimulationParams {
            envelope: EnvelopeParams {
                center_cm1: self.envelope.center_cm1,
                fwhm_cm1: self.envelope.fwhm_cm1,
                peak: self.envelope.peak,
            },
            snr: self.noise.snr,
            noise_seed: self.noise.seed,
            floor_fraction: self.analysis.envelope_floor,
        }
    }

    pub fn reconstruction_settings(&self) -> ReconstructionSettings {
        ReconstructionSettings {
            pmf: self.sampling.pmf,
            epsilon: self.epsilon,
            solver: self.solver.to_solver_config(),
        }
    }

    pub fn target_line(&self) -> TargetLine {
        TargetLine {
            species: self.analysis.target_species.clone(),
            nu0: self.analysis.line_center_cm1,
            half_window: self.analysis.line_half_window_cm1,
        }
    }
}
