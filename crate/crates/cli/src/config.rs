//! Run options from an optional TOML file, overridden by flags.

use std::path::Path;

use ermkit::fit::Model;
use serde::Deserialize;

use crate::CliError;

/// Keys accepted in a `--config` file. All are optional.
///
/// ```toml
/// model = "hanger"
/// f_center = 4.7076e9
/// f_span = 1.0e7
/// bracket_ps = 150.0
/// seed = 7
/// fixed_timestamp = 0
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<Model>,
    pub f_center: Option<f64>,
    pub f_span: Option<f64>,
    pub bracket_ps: Option<f64>,
    pub seed: Option<u64>,
    pub fixed_timestamp: Option<u64>,
}

pub const DEFAULT_BRACKET_PS: f64 = 1000.0;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Flags win over file values.
    pub fn merge(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            model: flags.model.or(self.model),
            f_center: flags.f_center.or(self.f_center),
            f_span: flags.f_span.or(self.f_span),
            bracket_ps: flags.bracket_ps.or(self.bracket_ps),
            seed: flags.seed.or(self.seed),
            fixed_timestamp: flags.fixed_timestamp.or(self.fixed_timestamp),
        }
    }

    pub fn bracket_s(&self) -> Result<(f64, f64), CliError> {
        let ps = self.bracket_ps.unwrap_or(DEFAULT_BRACKET_PS);
        if !(ps.is_finite() && ps > 0.0) {
            return Err(CliError::Data(format!("--bracket-ps must be positive, got {ps}")));
        }
        Ok((-ps * 1e-12, ps * 1e-12))
    }

    /// `(lo, hi)` in Hz when a band was requested.
    pub fn band(&self) -> Result<Option<(f64, f64)>, CliError> {
        match (self.f_center, self.f_span) {
            (Some(c), Some(s)) if c.is_finite() && s.is_finite() && s > 0.0 => Ok(Some((c - 0.5 * s, c + 0.5 * s))),
            (Some(_), Some(s)) => Err(CliError::Data(format!("--f-span must be positive, got {s}"))),
            (None, None) => Ok(None),
            _ => Err(CliError::Data("--f-center and --f-span must be given together".into())),
        }
    }
}
