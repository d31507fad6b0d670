//! Touchstone v1.1 (`.s1p`, `.s2p`, `.s3p`).
//!
//! Two-port files list each frequency as `f S11 S21 S12 S22`: S21 comes
//! before S12, unlike every other port count, which is row-major. Three-port
//! records span three lines, one matrix row per line.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::{FrequencySweep, ScatteringMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    pub fn multiplier(self) -> f64 {
        match self {
            FrequencyUnit::Hz => 1.0,
            FrequencyUnit::KHz => 1e3,
            FrequencyUnit::MHz => 1e6,
            FrequencyUnit::GHz => 1e9,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            FrequencyUnit::Hz => "Hz",
            FrequencyUnit::KHz => "kHz",
            FrequencyUnit::MHz => "MHz",
            FrequencyUnit::GHz => "GHz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataFormat {
    /// Real and imaginary part.
    RI,
    /// Magnitude and angle in degrees.
    MA,
    /// `20 log10` magnitude and angle in degrees.
    DB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchstoneOptions {
    pub frequency_unit: FrequencyUnit,
    pub format: DataFormat,
    /// Ohms.
    pub reference_impedance: f64,
}

impl Default for TouchstoneOptions {
    /// The v1.1 defaults: `# GHz S MA R 50`.
    fn default() -> Self {
        Self { frequency_unit: FrequencyUnit::GHz, format: DataFormat::MA, reference_impedance: 50.0 }
    }
}

impl TouchstoneOptions {
    /// Hz and real/imaginary pairs: the lossless choice for round trips.
    pub fn lossless() -> Self {
        Self { frequency_unit: FrequencyUnit::Hz, format: DataFormat::RI, reference_impedance: 50.0 }
    }
}

fn parse_option_line(body: &str, line: usize) -> Result<TouchstoneOptions> {
    let mut opts = TouchstoneOptions::default();
    let malformed = |reason: String| Error::MalformedOptionLine { line, reason };
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opts.frequency_unit = FrequencyUnit::Hz,
            "KHZ" => opts.frequency_unit = FrequencyUnit::KHz,
            "MHZ" => opts.frequency_unit = FrequencyUnit::MHz,
            "GHZ" => opts.frequency_unit = FrequencyUnit::GHz,
            "RI" => opts.format = DataFormat::RI,
            "MA" => opts.format = DataFormat::MA,
            "DB" => opts.format = DataFormat::DB,
            "S" => {}
            p @ ("Y" | "Z" | "H" | "G") => {
                return Err(Error::UnsupportedTouchstone { line, reason: format!("{p}-parameters are not supported") })
            }
            "R" => {
                let v = tokens.next().ok_or_else(|| malformed("R without a value".into()))?;
                let z0: f64 = v.parse().map_err(|_| malformed(format!("bad reference impedance `{v}`")))?;
                if !(z0 > 0.0) {
                    return Err(malformed(format!("reference impedance {z0} must be positive")));
                }
                opts.reference_impedance = z0;
            }
            _ => return Err(malformed(format!("unknown token `{tok}`"))),
        }
    }
    Ok(opts)
}

fn pair_to_complex(a: f64, b: f64, format: DataFormat) -> Complex64 {
    match format {
        DataFormat::RI => Complex64::new(a, b),
        DataFormat::MA => Complex64::from_polar(a, b.to_radians()),
        DataFormat::DB => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

fn complex_to_pair(z: Complex64, format: DataFormat) -> (f64, f64) {
    match format {
        DataFormat::RI => (z.re, z.im),
        DataFormat::MA => (z.norm(), z.arg().to_degrees()),
        DataFormat::DB => (20.0 * z.norm().log10(), z.arg().to_degrees()),
    }
}

/// File order of `(row, col)` entries, 0-based.
fn entry_order(n: usize) -> Vec<(usize, usize)> {
    if n == 2 {
        vec![(0, 0), (1, 0), (0, 1), (1, 1)]
    } else {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
    }
}

/// Port count from a `.sNp` extension.
pub fn ports_from_extension(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    let n: usize = ext.strip_prefix('s')?.strip_suffix('p')?.parse().ok()?;
    (1..=3).contains(&n).then_some(n)
}

/// Parses Touchstone text with `n_ports` ports (1 to 3).
pub fn parse_touchstone(text: &str, n_ports: usize) -> Result<(FrequencySweep<f64>, TouchstoneOptions)> {
    if !(1..=3).contains(&n_ports) {
        return Err(Error::UnsupportedTouchstone { line: 0, reason: format!("{n_ports}-port files are not supported") });
    }
    let mut opts: Option<TouchstoneOptions> = None;
    // Lines per record and values expected on each of them.
    let per_line: Vec<usize> = match n_ports {
        1 => vec![3],
        2 => vec![9],
        _ => vec![7, 6, 6],
    };
    let order = entry_order(n_ports);
    let mut freqs = Vec::new();
    let mut mats = Vec::new();
    let mut record: Vec<f64> = Vec::new();
    let mut record_line = 0;
    let mut part = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            return Err(Error::UnsupportedTouchstone {
                line,
                reason: format!("keyword {} belongs to Touchstone 2.0; only v1.1 is supported", content.split_whitespace().next().unwrap_or(content)),
            });
        }
        if let Some(body) = content.strip_prefix('#') {
            // Only the first option line counts.
            if opts.is_none() {
                opts = Some(parse_option_line(body, line)?);
            }
            continue;
        }
        let o = *opts.get_or_insert_with(TouchstoneOptions::default);
        let values = content
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::BadNumber { line, token: t.to_string() }))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != per_line[part] {
            return Err(Error::ColumnCountMismatch { line, expected: per_line[part], found: values.len() });
        }
        if part == 0 {
            record_line = line;
        }
        record.extend(values);
        part += 1;
        if part < per_line.len() {
            continue;
        }
        part = 0;
        let f = record[0] * o.frequency_unit.multiplier();
        if let Some(&prev) = freqs.last() {
            if !(f > prev) {
                return Err(Error::NonMonotonicFrequency { line: record_line, frequency: f });
            }
        }
        let mut rows = vec![vec![Complex64::new(0.0, 0.0); n_ports]; n_ports];
        for (k, &(i, j)) in order.iter().enumerate() {
            rows[i][j] = pair_to_complex(record[1 + 2 * k], record[2 + 2 * k], o.format);
        }
        freqs.push(f);
        mats.push(ScatteringMatrix::from_rows(&rows)?);
        record.clear();
    }
    if part != 0 {
        return Err(Error::ColumnCountMismatch { line: record_line, expected: per_line.iter().sum(), found: record.len() });
    }
    if freqs.is_empty() {
        return Err(Error::InvalidSweep("no data rows".into()));
    }
    Ok((FrequencySweep::new(freqs, mats)?, opts.unwrap_or_default()))
}

/// Reads a `.s1p`, `.s2p` or `.s3p` file; the port count comes from the
/// extension.
pub fn read_touchstone(path: &Path) -> Result<(FrequencySweep<f64>, TouchstoneOptions)> {
    let n = ports_from_extension(path).ok_or_else(|| Error::UnsupportedTouchstone {
        line: 0,
        reason: format!("cannot infer the port count from {}", path.display()),
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_touchstone(&text, n)
}

/// Formats a sweep as Touchstone v1.1 text with 17 significant digits.
pub fn write_touchstone(sweep: &FrequencySweep<f64>, opts: &TouchstoneOptions) -> Result<String> {
    let n = sweep.n_ports();
    if !(1..=3).contains(&n) {
        return Err(Error::UnsupportedTouchstone { line: 0, reason: format!("{n}-port sweeps are not supported") });
    }
    let fmt = match opts.format {
        DataFormat::RI => "RI",
        DataFormat::MA => "MA",
        DataFormat::DB => "DB",
    };
    let mut out = String::new();
    let _ = writeln!(out, "! ermkit {}", env!("CARGO_PKG_VERSION"));
    if n == 2 {
        let _ = writeln!(out, "! columns: f S11 S21 S12 S22");
    }
    let _ = writeln!(out, "# {} S {} R {}", opts.frequency_unit.keyword(), fmt, opts.reference_impedance);
    let order = entry_order(n);
    for (f, s) in sweep.iter() {
        let _ = write!(out, "{:.16e}", f / opts.frequency_unit.multiplier());
        for (k, &(i, j)) in order.iter().enumerate() {
            if n == 3 && k > 0 && k % 3 == 0 {
                out.push('\n');
            }
            let (a, b) = complex_to_pair(s[(i, j)], opts.format);
            let _ = write!(out, " {a:.16e} {b:.16e}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_touchstone_file(path: &Path, sweep: &FrequencySweep<f64>, opts: &TouchstoneOptions) -> Result<()> {
    let text = write_touchstone(sweep, opts)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
