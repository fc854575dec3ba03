//! Config-driven commands behind the `cdcs` binary. Each command writes its
//! outputs plus a `manifest_<command>.toml` into the output directory; the
//! manifest loads as a configuration and reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::analysis::{
    estimate_mole_fraction_in, estimate_mole_fraction_per_line, extract_line_metrics, rmse_masked,
    run_compression_sweep, run_parallel_species_experiment, run_robustness_protocol, simulate,
    summarize_sweep, ReconstructedSpectrum, Reconstruction, Simulation,
};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::fourier::HermitianFft;
use crate::io::{self, fmt_f64, INTERFEROGRAM_MAGIC};
use crate::sensing::sample_set_for;
use crate::spectral_model::{noise_sigma_for, original_spectrum, SpectralGrid};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sample,
    Reconstruct,
    Analyze,
    Sweep,
    MonteCarlo,
    Parallel,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sample => "sample",
            Command::Reconstruct => "reconstruct",
            Command::Analyze => "analyze",
            Command::Sweep => "sweep",
            Command::MonteCarlo => "montecarlo",
            Command::Parallel => "parallel",
        }
    }

    pub fn manifest_name(self) -> String {
        format!("manifest_{}.toml", self.name())
    }
}

/// What a command produced, for the caller to report.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// `key = value` highlights.
    pub highlights: Vec<(String, String)>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
    highlights: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            inputs: Vec::new(),
            highlights: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.highlights.push((key.to_string(), value.to_string()));
    }
}

/// Validates the configuration and runs one command.
pub fn run(command: Command, config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    let mut config = config.clone();
    let mut out = Outputs::new(&config.output.dir)?;
    let result = match command {
        Command::Simulate => cmd_simulate(&config, &mut out),
        Command::Sample => cmd_sample(&config, &mut out),
        Command::Reconstruct => cmd_reconstruct(&mut config, &mut out),
        Command::Analyze => cmd_analyze(&mut config, &mut out),
        Command::Sweep => cmd_sweep(&config, &mut out),
        Command::MonteCarlo => cmd_montecarlo(&config, &mut out),
        Command::Parallel => cmd_parallel(&config, &mut out),
    };
    // The manifest is written even when a late step fails, so partial
    // outputs stay traceable.
    let manifest = write_manifest(command, &config, &out)?;
    result?;
    Ok(RunSummary {
        outputs: out.files,
        manifest,
        highlights: out.highlights,
    })
}

fn write_manifest(command: Command, config: &PipelineConfig, out: &Outputs) -> Result<PathBuf> {
    let mut run = toml::Table::new();
    run.insert("command".into(), command.name().into());
    run.insert("manifest_format".into(), i64::from(MANIFEST_FORMAT_VERSION).into());
    run.insert(
        "interferogram_format".into(),
        String::from_utf8_lossy(INTERFEROGRAM_MAGIC).into_owned().into(),
    );
    run.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    run.insert("timestamp_unix".into(), (now as i64).into());

    let digests = |paths: &[PathBuf]| -> Result<toml::Table> {
        let mut t = toml::Table::new();
        for p in paths.iter().filter(|p| p.exists()) {
            t.insert(p.to_string_lossy().into_owned(), io::file_digest(p)?.into());
        }
        Ok(t)
    };
    let mut doc = toml::Table::new();
    doc.insert("run".into(), run.into());
    doc.insert("inputs".into(), digests(&out.inputs)?.into());
    doc.insert("outputs".into(), digests(&out.files)?.into());
    doc.insert(
        "config".into(),
        toml::Value::try_from(config).map_err(|e| Error::Config(e.to_string()))?,
    );
    let path = out.dir.join(command.manifest_name());
    fs::write(&path, toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?)?;
    Ok(path)
}

fn build_simulation(config: &PipelineConfig) -> Result<Simulation> {
    let grid = config.grid()?;
    simulate(&config.scenario()?, &grid, &config.simulation_params(), None)
}

fn cmd_simulate(config: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let sim = build_simulation(config)?;
    io::write_interferogram(&out.path("sample.ifg"), &sim.sample)?;
    io::write_interferogram(&out.path("reference.ifg"), &sim.reference)?;
    io::write_interferogram(&out.path("difference.ifg"), &sim.difference)?;
    let grid = sim.grid;
    let rows: Vec<Vec<String>> = (0..grid.n_spectral())
        .map(|k| {
            vec![
                fmt_f64(grid.wavenumber(k)),
                fmt_f64(sim.envelope.values()[k]),
                fmt_f64(sim.absorbance.spectrum.values()[k]),
                fmt_f64(sim.truth.values()[k]),
                fmt_f64(sim.original.transmittance[k]),
                if sim.original.valid[k] { "1" } else { "0" }.to_string(),
            ]
        })
        .collect();
    io::write_table_csv(
        &out.path("original_spectrum.csv"),
        &["nu_cm1", "envelope", "absorbance", "transmittance_true", "transmittance_fft", "valid"],
        &rows,
    )?;
    out.note("n_temporal", grid.n_temporal());
    out.note("sigma_t", fmt_f64(sim.sigma_t));
    out.note("skipped_lines", sim.absorbance.skipped_lines);
    Ok(())
}

fn cmd_sample(config: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let n = config.grid()?.n_temporal();
    let m = config.sampling.sample_count(n)?;
    let samples = sample_set_for(config.sampling.pmf, n, m, config.sampling.seed)?;
    io::write_sample_set(&out.path("samples.csv"), &samples)?;
    out.note("m", samples.m());
    out.note("compression_rate", fmt_f64(samples.compression_rate()));
    Ok(())
}

fn check_grid(expected: &SpectralGrid, actual: &SpectralGrid) -> Result<()> {
    if expected != actual {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn cmd_reconstruct(config: &mut PipelineConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.grid()?;
    let ifg_path = config
        .input
        .interferogram
        .get_or_insert_with(|| std::path::absolute(out.dir.join("difference.ifg")).unwrap_or_default())
        .clone();
    out.inputs.push(ifg_path.clone());
    let ifg = io::read_interferogram(&ifg_path)?;
    check_grid(&grid, &ifg.grid)?;
    let samples = match &config.input.samples {
        Some(p) => {
            out.inputs.push(p.clone());
            let s = io::read_sample_set(p)?;
            if s.n_temporal() != grid.n_temporal() {
                return Err(Error::GridMismatch);
            }
            s
        }
        None => {
            let m = config.sampling.sample_count(grid.n_temporal())?;
            sample_set_for(config.sampling.pmf, grid.n_temporal(), m, config.sampling.seed)?
        }
    };
    let envelope = config.simulation_params().envelope.build(&grid)?;
    let sigma_t = config.noise.snr.map_or(0.0, |snr| noise_sigma_for(snr, envelope.max()));
    let fft = Arc::new(HermitianFft::new(grid.n_temporal()));
    let floor = config.analysis.envelope_floor;
    let original = ReconstructedSpectrum::new(original_spectrum(&fft, &ifg)?, &envelope, floor)?;
    let rec = Reconstruction::solve(fft, &ifg, &envelope, floor, sigma_t, samples, &config.reconstruction_settings())?;
    io::write_spectrum_csv(
        &out.path("reconstructed_spectrum.csv"),
        &grid,
        &original.transmittance,
        &rec.spectrum.transmittance,
        &rec.spectrum.valid,
    )?;
    let mut report = rec.report.to_key_values();
    report.push_str(&format!(
        "m={}\nn_temporal={}\ncompression_rate={}\npmf={}\nsample_seed={}\nimaginary_rms={}\n",
        rec.samples.m(),
        rec.samples.n_temporal(),
        fmt_f64(rec.samples.compression_rate()),
        rec.samples.pmf().as_str(),
        rec.samples.seed(),
        fmt_f64(rec.spectrum.imaginary_rms()),
    ));
    fs::write(out.path("solver_report.txt"), report)?;
    out.note("status", rec.report.status.as_str());
    out.note("m", rec.samples.m());
    out.note("residual_norm", fmt_f64(rec.report.final_residual_norm));
    out.note("epsilon", fmt_f64(rec.report.epsilon));
    Ok(())
}

fn cmd_analyze(config: &mut PipelineConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.grid()?;
    let path = config
        .input
        .spectrum
        .get_or_insert_with(|| std::path::absolute(out.dir.join("reconstructed_spectrum.csv")).unwrap_or_default())
        .clone();
    out.inputs.push(path.clone());
    let table = io::read_spectrum_csv(&path)?;
    if table.nu.len() != grid.n_spectral() {
        return Err(Error::GridMismatch);
    }
    let a = &config.analysis;
    let scenario = config.scenario()?;
    let template = scenario.unit_absorbance(&a.target_species, &grid)?.spectrum.into_values();
    let truth = scenario.species_named(&a.target_species)?.mole_fraction;
    let fit = |t: &[f64]| {
        estimate_mole_fraction_in(a.fit_domain, t, &table.valid, &template, a.depth_threshold, None)
    };
    let q_rec = fit(&table.t_rec)?;
    let q_orig = fit(&table.t_orig)?;
    let rmse = rmse_masked(&table.t_rec, &table.t_orig, &table.valid, a.depth_threshold)?;
    let mut rows: Vec<Vec<String>> = vec![
        vec!["mole_fraction_true".into(), fmt_f64(truth)],
        vec!["mole_fraction_rec".into(), fmt_f64(q_rec)],
        vec!["mole_fraction_orig".into(), fmt_f64(q_orig)],
        vec!["mole_fraction_ratio".into(), fmt_f64(q_rec / q_orig)],
        vec!["rmse".into(), fmt_f64(rmse)],
    ];
    let target = config.target_line();
    match extract_line_metrics(&grid, &table.t_rec, &table.valid, target.window()) {
        Ok(m) => {
            let true_fwhm = target.true_fwhm(&scenario)?;
            rows.push(vec!["peak_T".into(), fmt_f64(m.peak_transmittance)]);
            rows.push(vec!["center_cm1".into(), fmt_f64(m.center)]);
            rows.push(vec!["center_deviation_cm1".into(), fmt_f64(m.center - target.nu0)]);
            rows.push(vec!["fwhm_cm1".into(), fmt_f64(m.linewidth_fwhm)]);
            rows.push(vec!["relative_linewidth".into(), fmt_f64(m.linewidth_fwhm / true_fwhm)]);
        }
        Err(e @ (Error::FitFailure(_) | Error::NoBinsSelected(_))) => {
            rows.push(vec!["line_fit".into(), e.to_string()]);
        }
        Err(e) => return Err(e),
    }
    let centers: Vec<f64> = scenario.species_named(&a.target_species)?.lines.iter().map(|l| l.nu0).collect();
    let per_line = estimate_mole_fraction_per_line(
        &grid,
        &table.t_rec,
        &table.valid,
        &template,
        a.depth_threshold,
        &centers,
        a.line_half_window_cm1,
    )?;
    for (c, q) in centers.iter().zip(per_line) {
        if let Some(q) = q {
            rows.push(vec![format!("mole_fraction_line_{}", fmt_f64(*c)), fmt_f64(q)]);
        }
    }
    io::write_table_csv(&out.path("analysis.csv"), &["quantity", "value"], &rows)?;
    out.note("mole_fraction_ratio", fmt_f64(q_rec / q_orig));
    out.note("rmse", fmt_f64(rmse));
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn cmd_sweep(config: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let s = &config.sweep;
    let rows = run_compression_sweep(
        &config.scenario()?,
        &config.grid()?,
        &config.simulation_params(),
        &s.snrs,
        &s.rates,
        s.seeds,
        s.base_seed,
        &config.reconstruction_settings(),
        &config.analysis.target_species,
        config.analysis.depth_threshold,
    )?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.snr),
                fmt_f64(r.rate),
                r.seed_index.to_string(),
                r.sample_seed.to_string(),
                r.noise_seed.to_string(),
                r.m.to_string(),
                opt(r.rmse),
                opt(r.mole_fraction_cs),
                opt(r.mole_fraction_orig),
                opt(r.ratio()),
                r.status.as_str().to_string(),
                fmt_f64(r.residual_norm),
            ]
        })
        .collect();
    io::write_table_csv(
        &out.path("sweep.csv"),
        &[
            "snr",
            "compression_rate",
            "seed_index",
            "sample_seed",
            "noise_seed",
            "m",
            "rmse",
            "mole_fraction_cs",
            "mole_fraction_orig",
            "mole_fraction_ratio",
            "solver_status",
            "residual_norm",
        ],
        &table,
    )?;
    let summary = summarize_sweep(&rows);
    let points: Vec<Vec<String>> = summary
        .points
        .iter()
        .map(|p| {
            vec![
                fmt_f64(p.snr),
                fmt_f64(p.rate),
                p.runs.to_string(),
                fmt_f64(p.median_rmse),
                fmt_f64(p.median_ratio),
                fmt_f64(p.median_ratio_deviation),
            ]
        })
        .collect();
    io::write_table_csv(
        &out.path("sweep_summary.csv"),
        &["snr", "compression_rate", "runs", "median_rmse", "median_ratio", "median_ratio_deviation"],
        &points,
    )?;
    let mut laws = Vec::new();
    let mut first_error = None;
    for snr in summary.snrs() {
        match summary.power_law(snr) {
            Ok(law) => {
                out.note(&format!("exponent_snr_{}", fmt_f64(snr)), fmt_f64(law.exponent));
                laws.push(vec![
                    fmt_f64(snr),
                    fmt_f64(law.exponent),
                    fmt_f64(law.prefactor),
                    fmt_f64(law.r_squared),
                ]);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    io::write_table_csv(&out.path("power_law.csv"), &["snr", "exponent", "prefactor", "r_squared"], &laws)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_montecarlo(config: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let mc = &config.montecarlo;
    let outcome = run_robustness_protocol(
        &config.scenario()?,
        &config.grid()?,
        &config.simulation_params(),
        &mc.path_lengths_m,
        &mc.rates,
        mc.trials,
        mc.base_seed,
        mc.seed_stride,
        &config.reconstruction_settings(),
        &config.target_line(),
        config.analysis.depth_threshold,
    )?;
    let rows: Vec<_> = outcome.trials.iter().map(|t| t.to_row()).collect();
    io::write_results_csv(&out.path("montecarlo_trials.csv"), &rows)?;
    let stats: Vec<Vec<String>> = outcome
        .stats
        .iter()
        .map(|s| {
            vec![
                s.condition.condition_id.to_string(),
                fmt_f64(s.condition.path_length_m),
                fmt_f64(s.condition.rate),
                s.trials.to_string(),
                s.fit_failures.to_string(),
                fmt_f64(s.peak_t_mean),
                fmt_f64(s.peak_t_std),
                fmt_f64(s.peak_t_snr),
                fmt_f64(s.depth_snr),
                fmt_f64(s.center_dev_mean),
                fmt_f64(s.center_dev_std),
                fmt_f64(s.rel_linewidth_mean),
                fmt_f64(s.rel_linewidth_std),
            ]
        })
        .collect();
    io::write_table_csv(
        &out.path("montecarlo_summary.csv"),
        &[
            "condition_id",
            "path_length_m",
            "compression_rate",
            "trials",
            "fit_failures",
            "peak_T_mean",
            "peak_T_std",
            "peak_T_mean_over_std",
            "depth_mean_over_std",
            "center_deviation_mean_cm1",
            "center_deviation_std_cm1",
            "relative_linewidth_mean",
            "relative_linewidth_std",
        ],
        &stats,
    )?;
    out.note("conditions", outcome.stats.len());
    out.note("trials", rows.len());
    Ok(())
}

fn cmd_parallel(config: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    let sim = build_simulation(config)?;
    let scenario = config.scenario()?;
    let m = config.sampling.sample_count(sim.grid.n_temporal())?;
    let outcome = run_parallel_species_experiment(
        &sim,
        &scenario,
        m,
        config.sampling.seed,
        &config.reconstruction_settings(),
        config.analysis.zoom_half_width_cm1,
    )?;
    io::write_spectrum_csv(
        &out.path("parallel_spectrum.csv"),
        &sim.grid,
        &outcome.t_orig,
        &outcome.reconstruction.spectrum.transmittance,
        &outcome.valid,
    )?;
    let mut rows = vec![vec![
        "all".to_string(),
        fmt_f64(sim.grid.nu_min()),
        fmt_f64(sim.grid.nu_max()),
        fmt_f64(outcome.error_std),
    ]];
    for w in &outcome.windows {
        rows.push(vec![w.species.clone(), fmt_f64(w.lo), fmt_f64(w.hi), opt(w.error_std)]);
    }
    io::write_table_csv(&out.path("parallel_summary.csv"), &["scope", "nu_lo_cm1", "nu_hi_cm1", "error_std"], &rows)?;
    out.note("m", m);
    out.note("error_std", fmt_f64(outcome.error_std));
    out.note("status", outcome.reconstruction.report.status.as_str());
    Ok(())
}
