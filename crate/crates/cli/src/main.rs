//! `cdcs`: simulate, compressively sample and reconstruct dual-comb
//! absorption spectra, and run the evaluation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use cdcs_core::config::PipelineConfig;
use cdcs_core::pipeline::{self, Command};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cdcs", version, about = "Compressive dual-comb spectroscopy pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate sample, reference and background-subtracted interferograms.
    Simulate(Common),
    /// Draw a sample set.
    Sample(Common),
    /// Reconstruct a spectrum from a subsampled interferogram.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Background-subtracted interferogram (default: <out>/difference.ifg).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Sample-set CSV to use instead of drawing one.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Mole fraction, RMSE and line metrics of a reconstructed spectrum.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Spectrum CSV (default: <out>/reconstructed_spectrum.csv).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// RMSE and mole-fraction ratio against compression rate.
    Sweep(Common),
    /// Repeated-sampling robustness of one absorption line.
    Montecarlo(Common),
    /// Multi-species reconstruction compared with the full-data spectrum.
    Parallel(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration or a run manifest; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the sampling pattern and the protocol base seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the full-scale grid (hours of runtime for the protocols).
    #[arg(long)]
    full_scale: bool,
}

impl Common {
    fn load(&self) -> cdcs_core::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if self.full_scale {
            cfg.make_full_scale();
        }
        if let Some(seed) = self.seed {
            cfg.override_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> cdcs_core::Result<pipeline::RunSummary> {
    let (command, common, setup): (Command, &Common, Box<dyn Fn(&mut PipelineConfig)>) = match &cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c, Box::new(|_| {})),
        Cmd::Sample(c) => (Command::Sample, c, Box::new(|_| {})),
        Cmd::Reconstruct { common, input, samples } => (
            Command::Reconstruct,
            common,
            Box::new(move |cfg: &mut PipelineConfig| {
                if let Some(p) = input {
                    cfg.input.interferogram = Some(p.clone());
                }
                if let Some(p) = samples {
                    cfg.input.samples = Some(p.clone());
                }
            }),
        ),
        Cmd::Analyze { common, input } => (
            Command::Analyze,
            common,
            Box::new(move |cfg: &mut PipelineConfig| {
                if let Some(p) = input {
                    cfg.input.spectrum = Some(p.clone());
                }
            }),
        ),
        Cmd::Sweep(c) => (Command::Sweep, c, Box::new(|_| {})),
        Cmd::Montecarlo(c) => (Command::MonteCarlo, c, Box::new(|_| {})),
        Cmd::Parallel(c) => (Command::Parallel, c, Box::new(|_| {})),
    };
    let mut cfg = common.load()?;
    setup(&mut cfg);
    pipeline::run(command, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(summary) => {
            for (k, v) in &summary.highlights {
                println!("{k} = {v}");
            }
            for p in &summary.outputs {
                println!("wrote {}", p.display());
            }
            println!("manifest {}", summary.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
