use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the network algebra, fitting pipeline and file readers.
#[derive(Debug, Error)]
pub enum Error {
    /// `|1 - S_kk * gamma|` fell below the singularity threshold: the
    /// termination closes a lossless loop at resonance.
    #[error("singular loop at port {port}: |1 - S_kk*gamma| = {denominator:e}")]
    SingularLoop { port: usize, denominator: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("port index {index} out of range 1..={n_ports}")]
    PortOutOfRange { index: usize, n_ports: usize },

    #[error("Gell-Mann index {0} out of range 1..=8")]
    GellMannIndex(usize),

    #[error("matrix is not port-1/port-2 symmetric (covering residual {residual:e})")]
    NotSymmetric { residual: f64 },

    #[error("junction too symmetric to classify generator {generator}")]
    DegenerateJunction { generator: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid frequency sweep: {0}")]
    InvalidSweep(String),

    #[error("phase jump of {jump:.3} rad between points {index} and {next} exceeds unwrap limit", next = index + 1)]
    PhaseUnwrapAmbiguity { index: usize, jump: f64 },

    #[error("band is dominated by the resonance (span {span_hz:e} Hz vs linewidth {linewidth_hz:e} Hz); common delay is not identifiable")]
    ResonanceDominatedBand { span_hz: f64, linewidth_hz: f64 },

    #[error("delay objective has no interior minimum in [{lo:e}, {hi:e}] s; widen the bracket")]
    NoBracket { lo: f64, hi: f64 },

    #[error("differential mode did not flatten: residual {residual:e} > threshold {threshold:e}")]
    ResidualTooLarge { residual: f64, threshold: f64 },

    #[error("insufficient span: {0}")]
    InsufficientSpan(String),

    #[error("singular Jacobian: parameter `{0}` is not identifiable from the data")]
    SingularJacobian(String),

    #[error("line {line}: malformed option line: {reason}")]
    MalformedOptionLine { line: usize, reason: String },

    #[error("line {line}: frequency {frequency} is not strictly increasing")]
    NonMonotonicFrequency { line: usize, frequency: f64 },

    #[error("line {line}: expected {expected} values, found {found}")]
    ColumnCountMismatch { line: usize, expected: usize, found: usize },

    #[error("line {line}: {reason}")]
    UnsupportedTouchstone { line: usize, reason: String },

    #[error("line {line}: malformed CSV: {reason}")]
    MalformedCsv { line: usize, reason: String },

    #[error("line {line}: cannot parse `{token}` as a number")]
    BadNumber { line: usize, token: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
