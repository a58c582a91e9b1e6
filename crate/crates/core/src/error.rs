use std::path::PathBuf;

use crate::grad::TrainTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frequency must be finite and non-negative, got {0} Hz")]
    NegativeFrequency(f64),

    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),

    #[error("sampling frequency must be finite and positive, got {0} Hz")]
    InvalidSamplingFrequency(f64),

    #[error("sampling frequency {fs} Hz yields kernel size {kernel_size} and stride {stride}")]
    DegenerateFrame {
        fs: f64,
        kernel_size: usize,
        stride: usize,
    },

    #[error("channel {0} has no energy and cannot be normalized")]
    DegenerateFilter(usize),

    #[error("filterbank has no filters")]
    EmptyBank,

    #[error("invalid ERB range: need 0 < f_min < f_max and n >= 2, got [{f_min}, {f_max}] with n = {n}")]
    InvalidRange { f_min: f64, f_max: f64, n: usize },

    #[error("signal of {len} samples is shorter than the kernel size {kernel_size}")]
    SignalTooShort { len: usize, kernel_size: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("mask value {0} outside [0, 1]")]
    MaskOutOfRange(f64),

    #[error("latent was produced at {latent} Hz but the layer is configured for {layer} Hz")]
    FrameMismatch { latent: f64, layer: f64 },

    #[error("layer has no sampling frequency set")]
    NotConfigured,

    #[error("gradient refers to weight generation {got}, current generation is {current}")]
    StaleGeneration { got: u64, current: u64 },

    #[error("reference signal is identically zero")]
    ZeroReference,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    /// The loss or a parameter update stopped being finite.
    #[error("training diverged at step {step}")]
    Diverged { step: usize, trace: Box<TrainTrace> },

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("malformed WAV file: {0}")]
    MalformedWav(String),

    #[error("invalid {kind} file {path}: {reason}")]
    InvalidFile {
        kind: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
