use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("symbol {symbol} out of range for spreading factor {sf}")]
    SymbolOutOfRange { symbol: u32, sf: u8 },

    #[error("sample rate {sample_rate_hz} Hz is below the signal bandwidth {bandwidth_hz} Hz")]
    SampleRateTooLow { sample_rate_hz: f64, bandwidth_hz: f64 },

    #[error("nothing to transmit: empty payload and zero preamble")]
    EmptyTransmission,

    #[error("carrier offset {cfo_hz} Hz aliases at sample rate {sample_rate_hz} Hz")]
    CfoAliasing { cfo_hz: f64, sample_rate_hz: f64 },

    #[error("buffer too short: {len} samples, need more than {needed}")]
    BufferTooShort { len: usize, needed: usize },

    #[error("empty buffer")]
    EmptyBuffer,

    #[error("all-zero buffer has no measurable spectrum")]
    DegenerateBuffer,

    #[error("cutoff {cutoff_hz} Hz is at or above Nyquist for {sample_rate_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, sample_rate_hz: f64 },

    #[error("population needs at least 2 devices, got {0}")]
    PopulationTooSmall(usize),

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("missing recording file {0}")]
    MissingFile(PathBuf),

    #[error("truncated data file {path}: {len} bytes is not a multiple of 8")]
    TruncatedData { path: PathBuf, len: u64 },

    #[error("unknown datatype {0:?}")]
    UnknownDatatype(String),

    #[error("malformed metadata: {0}")]
    Metadata(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: usize },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("dataset problem: {0}")]
    Dataset(String),

    #[error("missing dataset for scenario {0}")]
    MissingDataset(String),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    /// Stable short code for machine-parsable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::SymbolOutOfRange { .. } => "symbol_out_of_range",
            Error::SampleRateTooLow { .. } => "sample_rate_too_low",
            Error::EmptyTransmission => "empty_transmission",
            Error::CfoAliasing { .. } => "cfo_aliasing",
            Error::BufferTooShort { .. } => "buffer_too_short",
            Error::EmptyBuffer => "empty_buffer",
            Error::DegenerateBuffer => "degenerate_buffer",
            Error::CutoffAboveNyquist { .. } => "cutoff_above_nyquist",
            Error::PopulationTooSmall(_) => "population_too_small",
            Error::NonFiniteSample(_) => "non_finite_sample",
            Error::MissingFile(_) => "missing_file",
            Error::TruncatedData { .. } => "truncated_data",
            Error::UnknownDatatype(_) => "unknown_datatype",
            Error::Metadata(_) => "bad_metadata",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::Diverged { .. } => "diverged",
            Error::Dataset(_) => "dataset",
            Error::MissingDataset(_) => "missing_dataset",
            Error::Checkpoint(_) => "bad_checkpoint",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
