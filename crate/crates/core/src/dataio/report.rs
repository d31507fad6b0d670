//! JSON fit reports and CSV traces.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::FitResult;

pub const CSV_HEADER: [&str; 3] = ["frequency_hz", "re", "im"];

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl InputDigest {
    pub fn of_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.display().to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LabeledFit {
    pub label: String,
    pub q_loaded: f64,
    #[serde(flatten)]
    pub result: FitResult,
}

/// A machine-readable run summary.
///
/// Schema: `tool`, `version`, `timestamp` (Unix seconds), `inputs` (path,
/// digest, size), `confidence_interval_method`, `fits` (one entry per fit
/// with `label`, `model`, `params`, `ci95`, `covariance_labels`,
/// `covariance`, `rms_residual`, `n_points`, `converged`, `n_iterations`,
/// `q_loaded`) and a free-form `summary` map with sorted keys.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: u64,
    pub inputs: Vec<InputDigest>,
    pub confidence_interval_method: &'static str,
    pub fits: Vec<LabeledFit>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

impl Report {
    /// `timestamp` fixes the recorded time, for byte-identical reruns.
    pub fn new(timestamp: Option<u64>) -> Self {
        let now = || SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            tool: "ermkit",
            version: env!("CARGO_PKG_VERSION"),
            timestamp: timestamp.unwrap_or_else(now),
            inputs: Vec::new(),
            confidence_interval_method: "linearized (1.96 sigma from rms^2 (J^T J)^-1)",
            fits: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn add_fit(&mut self, label: &str, result: FitResult) {
        self.fits.push(LabeledFit { label: label.to_string(), q_loaded: result.q_loaded(), result });
    }

    pub fn note(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }
}

/// Pretty-printed JSON with a trailing newline. Non-finite numbers are
/// written as `null`.
pub fn write_fit_report(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One parameter trace as CSV with header `frequency_hz,re,im`.
pub fn write_csv(freqs: &[f64], values: &[Complex64]) -> Result<String> {
    if freqs.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: freqs.len(), found: values.len() });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for (f, z) in freqs.iter().zip(values) {
        w.write_record([format!("{f:.16e}"), format!("{:.16e}", z.re), format!("{:.16e}", z.im)]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

/// Reads a trace written by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::MalformedCsv { line: 1, reason: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::MalformedCsv { line: 1, reason: format!("expected header {}", CSV_HEADER.join(",")) });
    }
    let (mut freqs, mut values) = (Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => Error::ColumnCountMismatch { line, expected: 3, found: *len as usize },
            _ => Error::MalformedCsv { line, reason: e.to_string() },
        })?;
        let num = |i: usize| {
            let t = &rec[i];
            t.parse::<f64>().map_err(|_| Error::BadNumber { line, token: t.to_string() })
        };
        let f = num(0)?;
        if freqs.last().is_some_and(|&p| !(f > p)) {
            return Err(Error::NonMonotonicFrequency { line, frequency: f });
        }
        freqs.push(f);
        values.push(Complex64::new(num(1)?, num(2)?));
    }
    Ok((freqs, values))
}

pub fn read_csv(path: &Path) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{fit_lineshape, FitConfig, Model};
    use crate::models::{erm_response, ResonatorParams};

    #[test]
    fn csv_round_trip() {
        let f = vec![1e9, 1.5e9];
        let z = vec![Complex64::new(0.1, -0.2), Complex64::new(1.0 / 3.0, 2.0)];
        let text = write_csv(&f, &z).unwrap();
        assert!(text.starts_with("frequency_hz,re,im\n"));
        let (f2, z2) = parse_csv(&text).unwrap();
        assert_eq!(f, f2);
        assert_eq!(z, z2);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv("f,re,im\n1,0,0\n"), Err(Error::MalformedCsv { line: 1, .. })));
        assert!(matches!(parse_csv("frequency_hz,re,im\n1,0,0\n1,0,0\n"), Err(Error::NonMonotonicFrequency { line: 3, .. })));
        assert!(matches!(parse_csv("frequency_hz,re,im\n1,0\n"), Err(Error::ColumnCountMismatch { line: 2, .. })));
        assert!(matches!(parse_csv("frequency_hz,re,im\n1,a,0\n"), Err(Error::BadNumber { line: 2, .. })));
    }

    #[test]
    fn digest_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn report_contents_and_determinism() {
        let r = ResonatorParams::new(5e9, 1e6, 1e5).unwrap();
        let f: Vec<f64> = (0..201).map(|k| r.f0 + (k as f64 - 100.0) * 5e3).collect();
        let z: Vec<Complex64> = f.iter().map(|&x| erm_response(&r, x)).collect();
        let fit = fit_lineshape(&f, &z, &FitConfig::new(Model::Erm)).unwrap();
        let build = || {
            let mut rep = Report::new(Some(0));
            rep.add_fit("erm", fit.clone());
            rep.note("qi_ratio", 1.0);
            write_fit_report(&rep)
        };
        let text = build();
        assert_eq!(text, build());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let entry = &v["fits"][0];
        assert_eq!(entry["converged"], serde_json::Value::Bool(true));
        for key in ["f0", "qi", "qc", "amplitude", "phase_offset"] {
            assert!(entry["params"][key].is_number(), "{key}");
            assert!(entry["ci95"][key].is_number(), "{key}");
        }
        assert_eq!(v["timestamp"], 0);
    }
}
