//! Bundled synthetic line lists and the scenarios built on them.
//!
//! The lists are synthetic R-branch-like progressions (regenerated by
//! `scripts/gen_demo_lines.py`); real-molecule work needs a user-supplied
//! line-list file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::parse_line_list;
use crate::spectral_model::{GasScenario, SpectralGrid, SpectralLine, Species, REFERENCE_TEMPERATURE};

const DEMO: &str = include_str!("../data/demo_lines.csv");
const PARALLEL10: &str = include_str!("../data/parallel10_lines.csv");
const FULLSCALE: &str = include_str!("../data/fullscale_synthetic_lines.csv");

/// Cell pressure of every bundled scenario: 3 mbar.
pub const CELL_PRESSURE_PA: f64 = 300.0;

/// Desk window shared by the bundled demo and ten-species lists.
pub const DESK_NU_MIN: f64 = 2200.0;
pub const DESK_NU_MAX: f64 = 2262.2554;
pub const DESK_N_SPECTRAL: usize = 16384;

pub const FULL_NU_MIN: f64 = 2006.7;
pub const FULL_NU_MAX: f64 = 3013.4;
pub const FULL_N_SPECTRAL: usize = 262_144;

/// Mole fractions (ppm) of the two-species demo mixture.
pub const DEMO_MIXTURE_PPM: [(&str, f64); 2] = [("N2O", 42.0), ("CO", 120.0)];

/// Mole fractions (ppm) of the ten-species mixture.
pub const TEN_SPECIES_PPM: [(&str, f64); 10] = [
    ("N2O", 42.0),
    ("NO", 420.0),
    ("CO", 120.0),
    ("OCS", 26.0),
    ("CH4", 1500.0),
    ("C2H6", 490.0),
    ("C2H4", 540.0),
    ("C2H2", 6600.0),
    ("CO2", 280.0),
    ("H2O", 2100.0),
];

pub const BUNDLED_NAMES: [&str; 3] = ["demo", "parallel10", "fullscale-synthetic"];

pub fn bundled_text(name: &str) -> Option<&'static str> {
    match name {
        "demo" => Some(DEMO),
        "parallel10" => Some(PARALLEL10),
        "fullscale-synthetic" => Some(FULLSCALE),
        _ => None,
    }
}

/// Lines grouped by species, in first-appearance order.
pub type LineTable = Vec<(String, Vec<SpectralLine>)>;

pub fn group_by_species(rows: Vec<(String, SpectralLine)>) -> LineTable {
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, Vec<SpectralLine>> = BTreeMap::new();
    for (name, line) in rows {
        if !map.contains_key(&name) {
            order.push(name.clone());
        }
        map.entry(name).or_default().push(line);
    }
    order
        .into_iter()
        .map(|n| {
            let lines = map.remove(&n).unwrap_or_default();
            (n, lines)
        })
        .collect()
}

/// Loads a bundled list by name, or a CSV file otherwise.
pub fn load(source: &str) -> Result<LineTable> {
    let rows = match bundled_text(source) {
        Some(text) => parse_line_list(text, Path::new(source))?,
        None => crate::io::read_line_list(Path::new(source))?,
    };
    Ok(group_by_species(rows))
}

/// Builds a scenario from a line table and `(species, ppm)` pairs.
pub fn scenario_from(
    table: &LineTable,
    mixture: &[(&str, f64)],
    pressure_pa: f64,
    temperature_k: f64,
    path_length_m: f64,
) -> Result<GasScenario> {
    let species = mixture
        .iter()
        .map(|(name, ppm)| {
            let lines = table
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, l)| l.clone())
                .ok_or_else(|| Error::UnknownSpecies((*name).to_string()))?;
            Ok(Species {
                name: (*name).to_string(),
                lines,
                mole_fraction: ppm * 1e-6,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GasScenario::new(species, pressure_pa, temperature_k, path_length_m)
}

pub fn desk_grid() -> SpectralGrid {
    SpectralGrid::new(DESK_NU_MIN, DESK_NU_MAX, DESK_N_SPECTRAL).expect("valid desk grid")
}

pub fn full_scale_grid() -> SpectralGrid {
    SpectralGrid::new(FULL_NU_MIN, FULL_NU_MAX, FULL_N_SPECTRAL).expect("valid full-scale grid")
}

/// N₂O (42 ppm) and CO (120 ppm) at 3 mbar, 296 K.
pub fn demo_scenario(path_length_m: f64) -> Result<GasScenario> {
    scenario_from(&load("demo")?, &DEMO_MIXTURE_PPM, CELL_PRESSURE_PA, REFERENCE_TEMPERATURE, path_length_m)
}

/// The ten-species mixture on the desk window at 3 mbar, 296 K.
pub fn ten_species_scenario(path_length_m: f64) -> Result<GasScenario> {
    scenario_from(&load("parallel10")?, &TEN_SPECIES_PPM, CELL_PRESSURE_PA, REFERENCE_TEMPERATURE, path_length_m)
}

/// The ten-species mixture over the full-scale window (synthetic lines).
pub fn full_scale_synthetic_scenario(path_length_m: f64) -> Result<GasScenario> {
    scenario_from(&load("fullscale-synthetic")?, &TEN_SPECIES_PPM, CELL_PRESSURE_PA, REFERENCE_TEMPERATURE, path_length_m)
}
