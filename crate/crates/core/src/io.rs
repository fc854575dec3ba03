//! On-disk formats: line lists, interferograms, sample sets, spectra and
//! result tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sensing::{PmfKind, SampleSet};
use crate::spectral_model::{Interferogram, SpectralGrid, SpectralLine};

pub const INTERFEROGRAM_MAGIC: &[u8; 8] = b"CDCSIFG1";
const INTERFEROGRAM_HEADER_LEN: usize = 8 + 8 + 8 + 8 + 1 + 7;

pub const LINE_LIST_COLUMNS: [&str; 4] = [
    "species",
    "nu0_cm1",
    "intensity_cm_per_moleccm2",
    "molar_mass_amu",
];

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn read_line_list(path: &Path) -> Result<Vec<(String, SpectralLine)>> {
    let text = fs::read_to_string(path)?;
    parse_line_list(&text, path)
}

/// Parses line-list CSV text; `origin` labels error locations.
pub fn parse_line_list(text: &str, origin: &Path) -> Result<Vec<(String, SpectralLine)>> {
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        row,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut position = [usize::MAX; 4];
    for (col, name) in headers.iter().enumerate() {
        match LINE_LIST_COLUMNS.iter().position(|c| *c == name) {
            Some(i) if position[i] == usize::MAX => position[i] = col,
            Some(_) => return Err(parse_err(1, col + 1, format!("duplicate column `{name}`"))),
            None => return Err(parse_err(1, col + 1, format!("unknown column `{name}`"))),
        }
    }
    if let Some(i) = position.iter().position(|&p| p == usize::MAX) {
        return Err(parse_err(1, 0, format!("missing column `{}`", LINE_LIST_COLUMNS[i])));
    }

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| parse_err(row, 0, e.to_string()))?;
        let species = record.get(position[0]).unwrap_or("").to_string();
        if species.is_empty() {
            return Err(parse_err(row, position[0] + 1, "empty species name".into()));
        }
        let mut nums = [0.0; 3];
        for (slot, &col) in nums.iter_mut().zip(&position[1..]) {
            let field = record.get(col).unwrap_or("");
            *slot = field
                .parse()
                .map_err(|_| parse_err(row, col + 1, format!("`{field}` is not a number")))?;
        }
        let line = SpectralLine::new(nums[0], nums[1], nums[2]).map_err(|e| Error::Validation {
            path: origin.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        out.push((species, line));
    }
    Ok(out)
}

pub fn write_line_list(path: &Path, lines: &[(String, SpectralLine)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LINE_LIST_COLUMNS)?;
    for (species, line) in lines {
        w.write_record([
            species.clone(),
            fmt_f64(line.nu0),
            fmt_f64(line.intensity),
            fmt_f64(line.molar_mass),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn encode_interferogram(ifg: &Interferogram) -> Vec<u8> {
    let n = ifg.samples.len();
    let noise_len = ifg.noise.as_ref().map_or(0, |v| v.len());
    let mut buf = Vec::with_capacity(INTERFEROGRAM_HEADER_LEN + 8 * (n + noise_len));
    buf.extend_from_slice(INTERFEROGRAM_MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&ifg.grid.nu_min().to_le_bytes());
    buf.extend_from_slice(&ifg.grid.nu_max().to_le_bytes());
    buf.push(u8::from(ifg.noise.is_some()));
    buf.extend_from_slice(&[0u8; 7]);
    for v in &ifg.samples {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(noise) = &ifg.noise {
        for v in noise {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode_interferogram(bytes: &[u8], origin: &Path) -> Result<Interferogram> {
    if bytes.len() < 8 || &bytes[..8] != INTERFEROGRAM_MAGIC {
        return Err(Error::BadMagic(origin.to_path_buf()));
    }
    if bytes.len() < INTERFEROGRAM_HEADER_LEN {
        return Err(Error::Truncated {
            path: origin.to_path_buf(),
            expected: INTERFEROGRAM_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let word = |at: usize| -> [u8; 8] { bytes[at..at + 8].try_into().expect("8-byte slice") };
    let n = u64::from_le_bytes(word(8)) as usize;
    let nu_min = f64::from_le_bytes(word(16));
    let nu_max = f64::from_le_bytes(word(24));
    let has_noise = match bytes[32] {
        0 => false,
        1 => true,
        other => {
            return Err(Error::InvalidParameter {
                name: "has_noise",
                reason: format!("flag byte must be 0 or 1, got {other}"),
            })
        }
    };
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidParameter {
            name: "n_temporal",
            reason: format!("must be even and >= 2, got {n}"),
        });
    }
    let blocks = if has_noise { 2 } else { 1 };
    let expected = INTERFEROGRAM_HEADER_LEN + 8 * n * blocks;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: origin.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::LengthMismatch {
            context: "interferogram file size",
            expected,
            actual: bytes.len(),
        });
    }
    let grid = SpectralGrid::new(nu_min, nu_max, n / 2 + 1)?;
    let read_block = |start: usize| -> Vec<f64> {
        bytes[start..start + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect()
    };
    let samples = read_block(INTERFEROGRAM_HEADER_LEN);
    let noise = has_noise.then(|| read_block(INTERFEROGRAM_HEADER_LEN + 8 * n));
    Interferogram::new(grid, samples, noise)
}

pub fn write_interferogram(path: &Path, ifg: &Interferogram) -> Result<()> {
    fs::write(path, encode_interferogram(ifg))?;
    Ok(())
}

pub fn read_interferogram(path: &Path) -> Result<Interferogram> {
    decode_interferogram(&fs::read(path)?, path)
}

/// Sample set as `# key=value` metadata lines followed by an `index` column.
pub fn write_sample_set(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# seed={}", samples.seed())?;
    writeln!(f, "# pmf={}", samples.pmf().as_str())?;
    writeln!(f, "# n={}", samples.n_temporal())?;
    writeln!(f, "# m={}", samples.m())?;
    writeln!(f, "index")?;
    for l in samples.indices() {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_sample_set(path: &Path) -> Result<SampleSet> {
    let text = fs::read_to_string(path)?;
    let err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: 1,
        message,
    };
    let (mut seed, mut pmf, mut n, mut m) = (None, None, None, None);
    let mut indices = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if let Some(meta) = line.strip_prefix('#') {
            let (k, v) = meta
                .trim()
                .split_once('=')
                .ok_or_else(|| err(row, format!("malformed metadata `{line}`")))?;
            let v = v.trim();
            let bad = || err(row, format!("bad value `{v}` for `{k}`"));
            match k.trim() {
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
                "pmf" => pmf = Some(PmfKind::parse(v).ok_or_else(bad)?),
                "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                "m" => m = Some(v.parse::<usize>().map_err(|_| bad())?),
                other => return Err(err(row, format!("unknown metadata key `{other}`"))),
            }
        } else if line.is_empty() {
            continue;
        } else if !saw_header {
            if line != "index" {
                return Err(err(row, format!("expected `index` header, got `{line}`")));
            }
            saw_header = true;
        } else {
            indices.push(line.parse::<usize>().map_err(|_| err(row, format!("`{line}` is not an index")))?);
        }
    }
    let missing = |k: &str| err(0, format!("missing metadata `{k}`"));
    let n = n.ok_or_else(|| missing("n"))?;
    let m = m.ok_or_else(|| missing("m"))?;
    if m != indices.len() {
        return Err(Error::LengthMismatch {
            context: "sample set rows",
            expected: m,
            actual: indices.len(),
        });
    }
    SampleSet::from_indices(
        indices,
        n,
        pmf.ok_or_else(|| missing("pmf"))?,
        seed.ok_or_else(|| missing("seed"))?,
    )
}

/// Spectrum table `nu_cm1,transmittance_orig,transmittance_rec,valid`.
pub fn write_spectrum_csv(
    path: &Path,
    grid: &SpectralGrid,
    t_orig: &[f64],
    t_rec: &[f64],
    valid: &[bool],
) -> Result<()> {
    for (context, len) in [("transmittance_orig", t_orig.len()), ("transmittance_rec", t_rec.len()), ("valid", valid.len())] {
        if len != grid.n_spectral() {
            return Err(Error::LengthMismatch {
                context,
                expected: grid.n_spectral(),
                actual: len,
            });
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["nu_cm1", "transmittance_orig", "transmittance_rec", "valid"])?;
    for k in 0..grid.n_spectral() {
        w.write_record([
            fmt_f64(grid.wavenumber(k)),
            fmt_f64(t_orig[k]),
            fmt_f64(t_rec[k]),
            if valid[k] { "1".into() } else { "0".into() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub nu: Vec<f64>,
    pub t_orig: Vec<f64>,
    pub t_rec: Vec<f64>,
    pub valid: Vec<bool>,
}

pub fn read_spectrum_csv(path: &Path) -> Result<SpectrumTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["nu_cm1", "transmittance_orig", "transmittance_rec", "valid"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut table = SpectrumTable {
        nu: vec![],
        t_orig: vec![],
        t_rec: vec![],
        valid: vec![],
    };
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let num = |col: usize| -> Result<f64> {
            rec.get(col).unwrap_or("").parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: col + 1,
                message: "not a number".into(),
            })
        };
        table.nu.push(num(0)?);
        table.t_orig.push(num(1)?);
        table.t_rec.push(num(2)?);
        table.valid.push(match rec.get(3) {
            Some("1") => true,
            Some("0") => false,
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: 4,
                    message: "valid flag must be 0 or 1".into(),
                })
            }
        });
    }
    Ok(table)
}

pub const RESULT_COLUMNS: [&str; 12] = [
    "condition_id",
    "path_length_m",
    "compression_rate",
    "trial",
    "seed",
    "peak_T",
    "center_cm1",
    "fwhm_cm1",
    "mole_fraction",
    "rmse",
    "solver_status",
    "residual_norm",
];

/// One row of a per-trial results table. Metrics that could not be
/// computed (e.g. a failed line fit) are `None` and written as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub condition_id: usize,
    pub path_length_m: f64,
    pub compression_rate: f64,
    pub trial: usize,
    pub seed: u64,
    pub peak_t: Option<f64>,
    pub center_cm1: Option<f64>,
    pub fwhm_cm1: Option<f64>,
    pub mole_fraction: Option<f64>,
    pub rmse: Option<f64>,
    pub solver_status: String,
    pub residual_norm: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.condition_id.to_string(),
            fmt_f64(r.path_length_m),
            fmt_f64(r.compression_rate),
            r.trial.to_string(),
            r.seed.to_string(),
            opt(r.peak_t),
            opt(r.center_cm1),
            opt(r.fwhm_cm1),
            opt(r.mole_fraction),
            opt(r.rmse),
            r.solver_status.clone(),
            fmt_f64(r.residual_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer for summary outputs: a header and rows of
/// preformatted fields.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::LengthMismatch {
                context: "table row",
                expected: header.len(),
                actual: r.len(),
            });
        }
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Hex SHA-256 of a file's contents.
pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.0, 1.0, -2.5, 0.1, 1e-19, 5.024678e-19, 2238.36, 1e300, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(1e-19), "1e-19");
    }

    #[test]
    fn line_list_header_only() {
        let lines = parse_line_list(&format!("{}\n", LINE_LIST_COLUMNS.join(",")), Path::new("x")).unwrap();
        assert!(lines.is_empty());
    }

    #[test]
    fn line_list_single_row() {
        let text = "species,nu0_cm1,intensity_cm_per_moleccm2,molar_mass_amu\nN2O,2238.36,1.0e-19,44.0\n";
        let lines = parse_line_list(text, Path::new("x")).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].0, "N2O");
        assert_eq!(lines[0].1.nu0, 2238.36);
    }

    #[test]
    fn line_list_errors_name_location() {
        let text = "species,nu0_cm1,intensity_cm_per_moleccm2,molar_mass_amu\nN2O,2238.36,1e-19,44\nCO,2143.2,-1e-19,28\n";
        match parse_line_list(text, Path::new("x")) {
            Err(Error::Validation { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let text = "species,nu0_cm1,intensity_cm_per_moleccm2,molar_mass_amu\nN2O,abc,1e-19,44\n";
        match parse_line_list(text, Path::new("x")) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        let text = "species,nu0_cm1,intensity_cm_per_moleccm2,molar_mass_amu,extra\n";
        assert!(matches!(parse_line_list(text, Path::new("x")), Err(Error::Parse { column: 5, .. })));
        let text = "species,nu0_cm1,molar_mass_amu\n";
        assert!(matches!(parse_line_list(text, Path::new("x")), Err(Error::Parse { .. })));
    }
}
