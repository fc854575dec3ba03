use cdcs_core::analysis::{
    estimate_mole_fraction, fit_power_law, reconstruct, run_compression_sweep, run_parallel_species_experiment,
    simulate, summarize_sweep, ReconstructionSettings, SimulationParams,
};
use cdcs_core::linelists::{demo_scenario, ten_species_scenario};
use cdcs_core::sensing::{EpsilonPolicy, SampleSet};
use cdcs_core::spectral_model::SpectralGrid;
use cdcs_core::Error;

fn narrow_grid() -> SpectralGrid {
    SpectralGrid::new(2230.0, 2245.5648, 4097).unwrap()
}

#[test]
fn full_data_estimate_is_within_one_percent() {
    let grid = narrow_grid();
    let scenario = demo_scenario(10.0).unwrap();
    let sim = simulate(&scenario, &grid, &SimulationParams::default(), None).unwrap();
    let rec = reconstruct(&sim, SampleSet::full(grid.n_temporal()), &ReconstructionSettings::default()).unwrap();
    let template = scenario.unit_absorbance("N2O", &grid).unwrap().spectrum.into_values();
    let q = estimate_mole_fraction(&rec.spectrum.transmittance, &rec.spectrum.valid, &template, 0.01).unwrap();
    assert!((q / 42e-6 - 1.0).abs() < 0.01, "estimate {q}");
}

#[test]
fn full_sampling_ten_species_error_is_solver_limited() {
    let grid = narrow_grid();
    let scenario = ten_species_scenario(76.0).unwrap();
    // Noiseless, so the relaxed ε is zero and only the solver tolerance remains.
    let params = SimulationParams {
        snr: None,
        ..SimulationParams::default()
    };
    let sim = simulate(&scenario, &grid, &params, None).unwrap();
    let settings = ReconstructionSettings {
        epsilon: EpsilonPolicy::Relaxed,
        ..ReconstructionSettings::default()
    };
    let out = run_parallel_species_experiment(&sim, &scenario, grid.n_temporal(), 1, &settings, 0.1).unwrap();
    assert!(out.error_std < 1e-3, "{}", out.error_std);
    assert_eq!(out.windows.len(), scenario.species().len());
}

#[test]
fn three_rate_sweep_has_monotone_rmse() {
    let rows = run_compression_sweep(
        &demo_scenario(10.0).unwrap(),
        &narrow_grid(),
        &SimulationParams::default(),
        &[1000.0],
        &[2.0, 10.0, 50.0],
        2,
        100,
        &ReconstructionSettings::default(),
        "N2O",
        0.01,
    )
    .unwrap();
    assert_eq!(rows.len(), 6);
    let summary = summarize_sweep(&rows);
    let rmse: Vec<f64> = summary.series(1000.0).iter().map(|p| p.median_rmse).collect();
    assert!(rmse.windows(2).all(|w| w[1] > w[0]), "{rmse:?}");
    assert!(summary.power_law(1000.0).unwrap().exponent > 0.0);
}

#[test]
fn single_rate_power_law_is_degenerate() {
    assert!(matches!(fit_power_law(&[(10.0, 0.01)]), Err(Error::DegenerateInput(_))));
    let law = fit_power_law(&[(2.0, 2.0 * 2f64.powf(0.93)), (5.0, 2.0 * 5f64.powf(0.93)), (20.0, 2.0 * 20f64.powf(0.93))]).unwrap();
    assert!((law.exponent - 0.93).abs() < 1e-10 && (law.prefactor - 2.0).abs() < 1e-9);
}
