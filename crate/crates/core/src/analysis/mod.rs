//! Evaluation of reconstructed spectra and the experiment protocols built on
//! them.

mod experiment;
mod linefit;
mod metrics;

pub use experiment::{
    reconstruct, run_compression_sweep, run_parallel_species_experiment, run_robustness_protocol,
    simulate, summarize_sweep, EnvelopeParams, ParallelOutcome, Reconstruction, ReconstructionSettings,
    RobustnessCondition, RobustnessOutcome, RobustnessStats, Simulation, SimulationParams, SpeciesWindow,
    SweepPoint, SweepRow, SweepSummary, TargetLine, TrialRecord,
};
pub use linefit::{extract_line_metrics, LineMetrics, FWHM_PER_SIGMA, LINE_FIT_MAX_ITERS};
pub use metrics::{
    estimate_mole_fraction, estimate_mole_fraction_in, estimate_mole_fraction_per_line, fit_power_law,
    mean_std, rmse_masked, spearman, to_transmittance, FitDomain, PowerLaw, ReconstructedSpectrum,
};
