//! Exit criteria, one line each. Runs as a plain binary (`harness = false`)
//! so every line is printed whether it passes or not:
//!
//! ```text
//! cargo test -p cdcs-core --test acceptance
//! ```
//!
//! The full-scale recipe (criterion 8) takes hours and only runs with
//! `CDCS_FULL_SCALE=1`; `CDCS_FULL_SCALE_LINES` may point at a line-list
//! CSV for real molecules, otherwise the bundled synthetic list is used.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use cdcs_core::analysis::{
    run_compression_sweep, run_parallel_species_experiment, run_robustness_protocol, simulate, summarize_sweep,
    ReconstructionSettings, RobustnessStats, SimulationParams, TargetLine,
};
use cdcs_core::config::PipelineConfig;
use cdcs_core::fourier::HermitianFft;
use cdcs_core::linelists::{self, demo_scenario, desk_grid, ten_species_scenario};
use cdcs_core::pipeline::{self, Command};
use cdcs_core::sensing::{draw_sample_set, samples_for_rate, EpsilonPolicy, LinearOperator, Pmf, SensingOperator, SlopedPmf};
use cdcs_core::solver::{bpdn_solve, l1_norm, project_l1_ball, SolverConfig};
use cdcs_core::spectral_model::{absorbance_spectrum, transmittance, GasScenario, SpectralGrid, SpectralLine, Species};
use common::{fista_lambda_sweep, random_spectrum, real_inner, rel_error, sparse_spectrum, spearman, DenseOperator};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn sloped_operator(n_spectral: usize, m: usize, seed: u64) -> SensingOperator {
    let g = SpectralGrid::new(2200.0, 2200.0 + 0.0038 * (n_spectral - 1) as f64, n_spectral).unwrap();
    let pmf = Pmf::Sloped(SlopedPmf::new(g.n_temporal()).unwrap());
    SensingOperator::new(g, draw_sample_set(&pmf, m, seed).unwrap()).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn operator_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_dot = 0.0f64;
    for &n_spectral in &[9usize, 513, 4097] {
        let n = 2 * n_spectral - 2;
        for trial in 0..100 {
            let m = rng.random_range(1..n);
            let op = sloped_operator(n_spectral, m, 10_000 + trial);
            let x = random_spectrum(n_spectral, &mut rng);
            let v: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let lhs: f64 = op.apply_forward(&x).unwrap().iter().zip(&v).map(|(a, b)| a * b).sum();
            let rhs = real_inner(&x, &op.apply_adjoint(&v).unwrap());
            worst_dot = worst_dot.max((lhs - rhs).abs() / (cnorm(&x) * norm(&v)));
        }
    }
    let mut worst_dense = 0.0f64;
    for seed in 0..20 {
        let m = rng.random_range(1..16);
        let op = sloped_operator(9, m, seed);
        assert_eq!(op.grid().n_temporal(), 16);
        let dense = DenseOperator::new(9, op.samples().indices());
        let x = random_spectrum(9, &mut rng);
        let mut slow = vec![0.0; m];
        dense.forward(&x, &mut slow);
        for (a, b) in op.apply_forward(&x).unwrap().iter().zip(&slow) {
            worst_dense = worst_dense.max((a - b).abs());
        }
    }
    verdict(
        worst_dot <= 1e-10 && worst_dense <= 1e-12,
        format!("adjoint mismatch {worst_dot:.2e} (≤ 1e-10 relative), dense forward {worst_dense:.2e} (≤ 1e-12)"),
    )
}

fn exact_config(y: &[f64]) -> SolverConfig {
    SolverConfig {
        epsilon: 1e-8 * norm(y),
        optimality_tol: 1e-7,
        max_outer_iters: 60,
        max_inner_iters: 5000,
        ..SolverConfig::default()
    }
}

fn exact_recovery() -> Verdict {
    let mut recovered = 0;
    let mut solutions = Vec::new();
    for seed in 0..50u64 {
        let op = sloped_operator(513, 200, 5_000 + seed);
        let truth = sparse_spectrum(513, 5, seed);
        let y = op.apply_forward(&truth).unwrap();
        let sol = bpdn_solve(&op, &y, &exact_config(&y)).unwrap();
        if rel_error(&sol.x, &truth) <= 1e-4 {
            recovered += 1;
        }
        if seed < 10 {
            solutions.push((op, y, sol.x));
        }
    }
    let mut worst = 0.0f64;
    for (op, y, x) in &solutions {
        let dense = DenseOperator::new(513, op.samples().indices());
        let oracle = fista_lambda_sweep(&dense, y, 1e-7, 300);
        worst = worst.max(rel_error(x, &oracle));
    }
    verdict(
        recovered >= 48 && worst <= 1e-3,
        format!("{recovered}/50 runs within 1e-4 (need 48), FISTA disagreement {worst:.2e} on 10 instances (≤ 1e-3)"),
    )
}

fn projection_optimality() -> Verdict {
    let analytic = project_l1_ball(&[Complex64::new(3.0, 0.0), Complex64::new(1.0, 0.0)], 2.0);
    let analytic_ok = (analytic[0] - Complex64::new(2.0, 0.0)).norm() < 1e-15 && analytic[1].norm() < 1e-15;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut violations = 0;
    let mut cases = 0;
    for n in 1..=8 {
        for _ in 0..6 {
            let z: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 6.0 - 3.0))
                .collect();
            let tau = rng.random::<f64>() * 4.0;
            let p = project_l1_ball(&z, tau);
            let d = |q: &[Complex64]| z.iter().zip(q).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let best = d(&p);
            if l1_norm(&p) > tau * (1.0 + 1e-12) {
                violations += 1;
            }
            for _ in 0..10_000 {
                let raw: Vec<Complex64> =
                    (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
                let scale = tau * rng.random::<f64>().sqrt() / l1_norm(&raw).max(1e-300);
                let q: Vec<Complex64> = raw.iter().map(|w| w * scale).collect();
                if d(&q) < best - 1e-12 {
                    violations += 1;
                }
            }
            cases += 1;
        }
    }
    verdict(
        analytic_ok && violations == 0,
        format!("(3,1; τ=2) → ({:.3},{:.3}); {violations} better feasible points over {cases}×10000", analytic[0].re, analytic[1].re),
    )
}

fn forward_physics() -> Verdict {
    // Ideal gas density and the integrated Beer-Lambert absorbance, computed
    // here from the constants rather than through the library.
    const K_B: f64 = 1.380_649e-23;
    let (s, x, p, t, l_m) = (5e-19, 42e-6, 300.0, 296.0, 10.0);
    let expected_area = s * x * p / (K_B * t) * 1e-6 * l_m * 100.0;
    let line = SpectralLine::new(2238.36, s, 44.0).unwrap();
    let scenario = |lines: Vec<SpectralLine>, name: &str, fraction: f64| {
        GasScenario::new(vec![Species { name: name.into(), lines, mole_fraction: fraction }], p, t, l_m).unwrap()
    };
    let fine = SpectralGrid::new(2238.2, 2238.52, 3201).unwrap();
    let alpha = absorbance_spectrum(&scenario(vec![line], "N2O", x), &fine).unwrap();
    let a = alpha.spectrum.values();
    // Composite Simpson quadrature (3201 points, even number of intervals).
    let h = fine.resolution();
    let simpson = h / 3.0
        * (a[0] + a[a.len() - 1] + a[1..a.len() - 1].iter().enumerate().map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v }).sum::<f64>());
    let area_err = (simpson - expected_area).abs() / expected_area;

    let grid = desk_grid();
    let mixture = demo_scenario(10.0).unwrap();
    let together = transmittance(&absorbance_spectrum(&mixture, &grid).unwrap().spectrum).unwrap();
    let mut product = vec![1.0; grid.n_spectral()];
    for sp in mixture.species() {
        let alone = scenario(sp.lines.clone(), &sp.name, sp.mole_fraction);
        let t_s = transmittance(&absorbance_spectrum(&alone, &grid).unwrap().spectrum).unwrap();
        product.iter_mut().zip(t_s.values()).for_each(|(p, v)| *p *= v);
    }
    let mult_err = together.values().iter().zip(&product).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut parseval_err = 0.0f64;
    for &n_spectral in &[9usize, 513, 16384] {
        let fft = HermitianFft::new(2 * n_spectral - 2);
        let spec = random_spectrum(n_spectral, &mut rng);
        let mut time = vec![0.0; 2 * n_spectral - 2];
        fft.to_time(&spec, &mut time);
        let energy_t: f64 = time.iter().map(|v| v * v).sum();
        let energy_f: f64 = spec
            .iter()
            .enumerate()
            .map(|(k, z)| if k == 0 || k == n_spectral - 1 { z.norm_sqr() } else { 2.0 * z.norm_sqr() })
            .sum();
        parseval_err = parseval_err.max((energy_t - energy_f).abs() / energy_f);
    }
    verdict(
        area_err <= 1e-3 && mult_err <= 1e-12 && parseval_err <= 1e-10,
        format!("line area error {area_err:.2e} (≤ 1e-3), multiplicativity {mult_err:.2e} (≤ 1e-12), Parseval {parseval_err:.2e} (≤ 1e-10)"),
    )
}

fn rate_sweep() -> Verdict {
    const RATES: [f64; 6] = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    // One-sided 5% critical value of Spearman's ρ for six points.
    const RHO_CRITICAL_N6: f64 = 0.829;
    let rows = run_compression_sweep(
        &demo_scenario(10.0).unwrap(),
        &desk_grid(),
        &SimulationParams::default(),
        &[1000.0, 100.0],
        &RATES,
        10,
        100,
        &ReconstructionSettings::default(),
        "N2O",
        0.01,
    )
    .unwrap();
    let summary = summarize_sweep(&rows);
    let hi = summary.series(1000.0);
    let lo = summary.series(100.0);
    let rmse_hi: Vec<f64> = hi.iter().map(|p| p.median_rmse).collect();
    let rmse_lo: Vec<f64> = lo.iter().map(|p| p.median_rmse).collect();
    let dev_hi: Vec<f64> = hi.iter().map(|p| p.median_ratio_deviation).collect();

    let rho = spearman(&RATES, &rmse_hi);
    let a = rho == 1.0;
    let exponent = summary.power_law(1000.0).map(|l| l.exponent).unwrap_or(f64::NAN);
    let b = (0.5..=1.3).contains(&exponent);
    let low_rate_dev = dev_hi.iter().zip(RATES).filter(|(_, r)| *r <= 10.0).map(|(d, _)| *d).fold(0.0, f64::max);
    let rho_dev = spearman(&RATES, &dev_hi);
    let c = low_rate_dev <= 0.05 && rho_dev >= RHO_CRITICAL_N6;
    let below: Vec<String> = RATES
        .iter()
        .zip(rmse_lo.iter().zip(&rmse_hi))
        .filter(|(_, (l, h))| l < h)
        .map(|(r, (l, h))| format!("rate {r}: {l:.4} < {h:.4}"))
        .collect();
    let d = below.is_empty();
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    verdict(
        a && b && c && d,
        format!(
            "(a) {} ρ={rho:.3}; (b) {} exponent {exponent:.3} in [0.5, 1.3]; (c) {} max deviation at rate ≤ 10 {:.2}% (≤ 5%), trend ρ={rho_dev:.3}; (d) {} {}",
            mark(a),
            mark(b),
            mark(c),
            100.0 * low_rate_dev,
            mark(d),
            if d { "SNR 100 RMSE ≥ SNR 1000 at every rate".to_string() } else { below.join(", ") },
        ),
    )
}

/// Pairs `(earlier, later)` where `later` is strictly smaller.
fn count_decreasing(values: &[f64]) -> (usize, usize) {
    let down = values.windows(2).filter(|w| w[1] < w[0]).count();
    (down, values.len().saturating_sub(1))
}

fn robustness() -> Verdict {
    const PATHS: [f64; 5] = [76.0, 11.4, 1.67, 0.76, 0.15];
    const RATES: [f64; 3] = [5.0, 20.0, 80.0];
    let grid = SpectralGrid::new(2230.0, 2245.5648, 4097).unwrap();
    let target = TargetLine { species: "N2O".into(), nu0: 2238.36, half_window: 0.05 };
    let outcome = run_robustness_protocol(
        &demo_scenario(10.0).unwrap(),
        &grid,
        &SimulationParams::default(),
        &PATHS,
        &RATES,
        20,
        1000,
        1,
        &ReconstructionSettings::default(),
        &target,
        0.01,
    )
    .unwrap();
    let stat = |l: f64, r: f64| -> &RobustnessStats {
        outcome.stats.iter().find(|s| s.condition.path_length_m == l && s.condition.rate == r).unwrap()
    };

    // Sign tests on adjacent conditions. 9 of 10 and 10 of 12 are the
    // smallest counts significant at the one-sided 5% level.
    let (mut rate_down, mut rate_pairs) = (0, 0);
    for l in PATHS {
        let (d, n) = count_decreasing(&RATES.map(|r| stat(l, r).depth_snr));
        rate_down += d;
        rate_pairs += n;
    }
    let (mut abs_down, mut abs_pairs) = (0, 0);
    let (mut literal_down, mut literal_pairs) = (0, 0);
    for r in RATES {
        let (d, n) = count_decreasing(&PATHS.map(|l| stat(l, r).depth_snr));
        abs_down += d;
        abs_pairs += n;
        let (d, n) = count_decreasing(&PATHS.map(|l| stat(l, r).peak_t_snr));
        literal_down += d;
        literal_pairs += n;
    }
    let bin = grid.resolution();
    let worst_center = RATES.iter().filter(|&&r| r <= 20.0).map(|&r| stat(76.0, r).center_dev_mean).fold(0.0, f64::max);
    let failures: usize = outcome.stats.iter().map(|s| s.fit_failures).sum();
    verdict(
        rate_down >= 9 && abs_down >= 10 && worst_center <= bin,
        format!(
            "depth mean/std falls with rate in {rate_down}/{rate_pairs} pairs (need 9), rises with absorbance in {abs_down}/{abs_pairs} (need 10); \
             literal T mean/std rises with absorbance in {literal_down}/{literal_pairs}; 76 m center deviation {worst_center:.2e} ≤ {bin:.4} cm⁻¹; {failures} fit failures"
        ),
    )
}

fn ten_species() -> Verdict {
    let grid = desk_grid();
    let scenario = ten_species_scenario(76.0).unwrap();
    let sim = simulate(&scenario, &grid, &SimulationParams::default(), None).unwrap();
    let settings = ReconstructionSettings { epsilon: EpsilonPolicy::Relaxed, ..ReconstructionSettings::default() };
    let m = samples_for_rate(grid.n_temporal(), 10.5).unwrap();
    let out = run_parallel_species_experiment(&sim, &scenario, m, 7, &settings, 0.1).unwrap();
    verdict(out.error_std < 0.005, format!("error std {:.5} (< 0.005), m = {m}", out.error_std))
}

fn full_scale() -> Verdict {
    if std::env::var("CDCS_FULL_SCALE").as_deref() != Ok("1") {
        return Verdict::Skip("set CDCS_FULL_SCALE=1 to run (hours)".into());
    }
    let table = match std::env::var("CDCS_FULL_SCALE_LINES") {
        Ok(path) => linelists::load(&path).unwrap(),
        Err(_) => linelists::load("fullscale-synthetic").unwrap(),
    };
    let grid = linelists::full_scale_grid();
    assert_eq!(grid.n_temporal(), 524_286);
    let reference_t = cdcs_core::spectral_model::REFERENCE_TEMPERATURE;
    let pair = linelists::scenario_from(&table, &linelists::DEMO_MIXTURE_PPM, linelists::CELL_PRESSURE_PA, reference_t, 10.0).unwrap();
    let rows = run_compression_sweep(
        &pair,
        &grid,
        &SimulationParams::default(),
        &[1000.0],
        &[grid.n_temporal() as f64 / 5000.0],
        1,
        100,
        &ReconstructionSettings::default(),
        "N2O",
        0.01,
    )
    .unwrap();
    let deviation = rows[0].ratio().map_or(f64::NAN, |q| (q - 1.0).abs());

    let ten = linelists::scenario_from(&table, &linelists::TEN_SPECIES_PPM, linelists::CELL_PRESSURE_PA, reference_t, 76.0).unwrap();
    let sim = simulate(&ten, &grid, &SimulationParams::default(), None).unwrap();
    let settings = ReconstructionSettings { epsilon: EpsilonPolicy::Relaxed, ..ReconstructionSettings::default() };
    let out = run_parallel_species_experiment(&sim, &ten, 50_000, 7, &settings, 0.1).unwrap();
    verdict(
        deviation <= 0.06 && out.error_std <= 0.003 * 1.5,
        format!("M = 5000 mole-fraction deviation {:.2}% (≤ 6%), M = 50000 ten-species error std {:.5} (≤ 0.0045)", 100.0 * deviation, out.error_std),
    )
}

fn outputs_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.file_name().unwrap().to_string_lossy().starts_with("manifest_"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let mut cfg = PipelineConfig::default();
    cfg.grid.nu_min_cm1 = 2230.0;
    cfg.grid.nu_max_cm1 = 2245.5648;
    cfg.grid.n_spectral = 4097;
    cfg.sweep.snrs = vec![1000.0, 100.0];
    cfg.sweep.rates = vec![2.0, 5.0, 10.0];
    cfg.sweep.seeds = 2;
    cfg.montecarlo.path_lengths_m = vec![76.0, 1.67];
    cfg.montecarlo.rates = vec![5.0];
    cfg.montecarlo.trials = 3;
    cfg.output.dir = first.clone();

    let commands = [
        Command::Simulate,
        Command::Sample,
        Command::Reconstruct,
        Command::Analyze,
        Command::Sweep,
        Command::MonteCarlo,
        Command::Parallel,
    ];
    let mut mismatched = Vec::new();
    for command in commands {
        // Later stages read their inputs from the first run's directory.
        let summary = pipeline::run(command, &cfg).unwrap();
        let replay_dir = tmp.path().join(command.name());
        let mut replay = PipelineConfig::load(&summary.manifest).unwrap();
        replay.output.dir = replay_dir.clone();
        pipeline::run(command, &replay).unwrap();
        let produced: Vec<String> =
            summary.outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        let original: Vec<(String, Vec<u8>)> =
            outputs_of(&first).into_iter().filter(|(name, _)| produced.contains(name)).collect();
        if original.len() != produced.len() || outputs_of(&replay_dir) != original {
            mismatched.push(command.name());
        }
    }
    verdict(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "all 7 commands reproduce byte-identical outputs from their manifests".into()
        } else {
            format!("outputs differ for {}", mismatched.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("1 operator correctness", operator_correctness),
        ("2 solver exact recovery", exact_recovery),
        ("3 projection optimality", projection_optimality),
        ("4 forward-model physics", forward_physics),
        ("5 desk-scale rate sweep", rate_sweep),
        ("6 desk-scale robustness", robustness),
        ("7 desk-scale ten species", ten_species),
        ("8 full-scale recipe", full_scale),
        ("9 determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (tag, detail) = match check() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {name}: {detail} ({:.1} s)", start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
