use std::path::PathBuf;

/// Errors produced anywhere in the physical-layer pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: f64, right: f64 },

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("resample factor {0} outside (0.9, 1.1)")]
    ResampleFactor(f64),

    #[error("Nyquist violation: band edge {band_edge} Hz exceeds {nyquist} Hz")]
    Nyquist { band_edge: f64, nyquist: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("odd-length bit sequence ({0} bits)")]
    OddLength(usize),

    #[error("expected {expected} symbols, got {got}")]
    SymbolCount { expected: usize, got: usize },

    #[error("payload needs {required} coded bits but the frame carries {available}")]
    PayloadOverflow { required: usize, available: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("path delay {delay} s exceeds the {max} s limit")]
    DelayTooLarge { delay: f64, max: f64 },

    #[error("invalid channel: {0}")]
    Channel(String),

    #[error("tap file line {line}: {msg}")]
    TapFile { line: usize, msg: String },

    #[error("no paths")]
    NoPaths,

    #[error("zero-energy input")]
    ZeroEnergy,

    #[error("no frame detected (metric {metric:.2}, threshold {threshold:.2})")]
    NoFrameDetected { metric: f64, threshold: f64 },

    #[error("doppler estimate unreliable (spectral peak ratio {ratio:.2})")]
    DopplerUnreliable { ratio: f64 },

    #[error("window [{start}, {end}) outside buffer of {len} samples")]
    WindowOutOfRange { start: i64, end: i64, len: usize },

    #[error("probe extension {l_max} s exceeds guard {guard} s")]
    ProbeTooLong { l_max: f64, guard: f64 },

    #[error("dictionary delay span {taps} exceeds bound {bound}")]
    DictionaryTooLong { taps: usize, bound: usize },

    #[error("zero channel estimate")]
    ZeroEstimate,

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
