//! Result envelopes, provenance, error classification and plot-data emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Error kinds that reflect bad input or configuration rather than a numerical failure.
const VALIDATION_KINDS: &[&str] = &[
    "AtomCountMismatch",
    "DimensionMismatch",
    "DuplicateAtom",
    "Empty",
    "InvalidDiscretization",
    "InvalidInterval",
    "InvalidLadder",
    "InvalidTarget",
    "InvalidTime",
    "InvalidTolerance",
    "InvalidWindow",
    "LengthMismatch",
    "MissingPsiTildeSample",
    "NonFiniteCoefficient",
    "NonPositiveDensity",
    "NonPositiveSupport",
    "NonPositiveT",
    "NonPositiveWeight",
    "NormalizationViolated",
    "NotUnimodular",
    "OutsideDisk",
    "ProbeLength",
    "SplitOutsideInterval",
    "StepUnstable",
    "TooFewModes",
    "TruncationTooSmall",
    "ZeroProbe",
    "ZeroSymbol",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: malformed JSON: {message}")]
    MalformedJson { path: PathBuf, message: String },
    #[error("invalid argument {name}: {message}")]
    InvalidArgument { name: &'static str, message: String },
    #[error("{message}")]
    Library { kind: &'static str, message: String },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "Io",
            Self::MalformedJson { .. } => "MalformedJson",
            Self::InvalidArgument { .. } => "InvalidArgument",
            Self::Library { kind, .. } => kind,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => EXIT_IO,
            Self::MalformedJson { .. } | Self::InvalidArgument { .. } => EXIT_VALIDATION,
            Self::Library { kind, .. } if VALIDATION_KINDS.contains(kind) => EXIT_VALIDATION,
            Self::Library { .. } => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), message: err.to_string() }
    }
}

/// Wrap a library error, keeping its kind.
pub trait LibraryResult<T> {
    fn lib(self) -> Result<T, CliError>;
}

macro_rules! library_error {
    ($($t:ty),* $(,)?) => {$(
        impl<T> LibraryResult<T> for Result<T, $t> {
            fn lib(self) -> Result<T, CliError> {
                self.map_err(|e| CliError::Library { kind: e.kind(), message: e.to_string() })
            }
        }
    )*};
}

library_error!(
    hankel_core::measure::MeasureError,
    hankel_core::model::ModelError,
    hankel_core::direct_map::DirectMapError,
    hankel_core::inverse_map::InverseMapError,
    hankel_core::diagnostics::DiagnosticsError,
    hankel_core::perturbation::PerturbationError,
    hankel_core::szego_flow::SzegoError,
);

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub command: &'static str,
    /// SHA-256 of the input file, or of the canonical configuration when there is no input file.
    pub input_sha256: String,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &'static str, input: &[u8], seed: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command,
            input_sha256: hex::encode(Sha256::digest(input)),
            tolerances: BTreeMap::new(),
            seed,
        }
    }

    pub fn tol(mut self, name: &'static str, value: f64) -> Self {
        self.tolerances.insert(name, value);
        self
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: &'a T,
}

#[derive(Serialize)]
struct ErrorEnvelope<'a> {
    provenance: Option<&'a Provenance>,
    error: &'static str,
    message: String,
    exit_code: i32,
}

pub fn render<T: Serialize>(provenance: &Provenance, result: &T) -> String {
    let mut text = serde_json::to_string_pretty(&Envelope { provenance, result }).expect("results serialize");
    text.push('\n');
    text
}

pub fn render_error(provenance: Option<&Provenance>, err: &CliError) -> String {
    let payload = ErrorEnvelope { provenance, error: err.kind(), message: err.to_string(), exit_code: err.exit_code() };
    let mut text = serde_json::to_string_pretty(&payload).expect("errors serialize");
    text.push('\n');
    text
}

/// `(series, x, y)` rows written as CSV.
#[derive(Debug, Default)]
pub struct PlotData {
    rows: Vec<(&'static str, f64, f64)>,
}

impl PlotData {
    pub fn push(&mut self, series: &'static str, x: f64, y: f64) {
        self.rows.push((series, x, y));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,x,y\n");
        for (series, x, y) in &self.rows {
            writeln!(out, "{series},{x:e},{y:e}").expect("string write");
        }
        out
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
