//! `ermkit`: synthesize, delay-match, extract and fit hanger-resonator sweeps.
//!
//! Exit codes: 0 on success, 2 on data or usage errors, 3 when a fit does not
//! converge. Data goes to files or stdout; diagnostics go to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ermkit::fit::Model;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Data(String),
    NonConvergence(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(m) => write!(f, "error: {m}"),
            CliError::NonConvergence(m) => write!(f, "fit did not converge: {m}"),
        }
    }
}

impl From<ermkit::Error> for CliError {
    fn from(e: ermkit::Error) -> Self {
        match e {
            ermkit::Error::SingularJacobian(_) => CliError::NonConvergence(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ermkit", version, about = "Effective reflection mode analysis of hanger-coupled resonators")]
struct Cli {
    /// TOML file with default values for the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Band centre in Hz; needs --f-span. Without both, the strongest |S21|
    /// feature picks the band.
    #[arg(long, global = true)]
    f_center: Option<f64>,
    /// Band width in Hz.
    #[arg(long, global = true)]
    f_span: Option<f64>,
    /// Half-width of the port-2 delay search, picoseconds (default 1000).
    #[arg(long, global = true)]
    bracket_ps: Option<f64>,
    /// Noise seed for `synth`, overriding the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Unix time recorded in reports, for byte-identical reruns.
    #[arg(long, global = true)]
    fixed_timestamp: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic two-port sweep from a scenario file.
    Synth {
        /// Scenario TOML; omitted keys take the default CPW scenario.
        scenario: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Remove the common delay and match the port-2 reference plane.
    DelayMatch {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write common mode, differential mode and splitting traces plus a figure.
    ExtractErm {
        input: PathBuf,
        #[arg(short, long)]
        out_dir: PathBuf,
    },
    /// Fit one lineshape to a Touchstone file or an extracted CSV trace.
    Fit {
        input: PathBuf,
        /// erm, hanger, reflection, lossy-erm or dcm (default erm).
        #[arg(long)]
        model: Option<Model>,
        /// JSON report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit the same band with the hanger and the ERM lineshapes.
    Compare {
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let model = match &cli.command {
        Command::Fit { model, .. } => *model,
        _ => None,
    };
    let flags = RunConfig {
        model,
        f_center: cli.f_center,
        f_span: cli.f_span,
        bracket_ps: cli.bracket_ps,
        seed: cli.seed,
        fixed_timestamp: cli.fixed_timestamp,
    };
    let cfg = file.merge(flags);
    match cli.command {
        Command::Synth { scenario, out } => commands::synth(scenario.as_deref(), &out, &cfg),
        Command::DelayMatch { input, out } => commands::delay_match(&input, &out, &cfg),
        Command::ExtractErm { input, out_dir } => commands::extract_erm(&input, &out_dir, &cfg),
        Command::Fit { input, report, .. } => commands::fit(&input, report.as_deref(), &cfg),
        Command::Compare { input, report } => commands::compare(&input, report.as_deref(), &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ERMKIT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::from(ermkit::Error::InvalidSweep("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(ermkit::Error::BadNumber { line: 3, token: "q".into() }).exit_code(), 2);
        assert_eq!(CliError::from(ermkit::Error::SingularJacobian("qc".into())).exit_code(), 3);
        assert_eq!(CliError::NonConvergence(String::new()).exit_code(), 3);
    }
}
