use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants split into two families: quantization-domain failures (bad
/// statistics, formulas evaluated outside their domain, inconsistent models)
/// and I/O or parse failures. [`Error::exit_code`] maps them onto the CLI's
/// exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fixed-point format: {0}")]
    InvalidFormat(String),

    #[error("non-finite sample {value} at index {index}")]
    NonFiniteSample { index: usize, value: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("SQNR undefined: signal power is zero")]
    ZeroSignalPower,

    #[error("all-zero tensor: {0}")]
    AllZero(&'static str),

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error("gamma shape {kappa} too large (Γ overflows above 170)")]
    GammaOverflow { kappa: f64 },

    #[error("level count {n} below the minimum {min} for the asymptotic formulas")]
    LevelsTooSmall { n: u64, min: u64 },

    #[error("logarithm of non-positive value {value} in {factor}")]
    NonPositiveLog { factor: &'static str, value: f64 },

    #[error("support-length bracket is {value} at N = {n}; N too small for the asymptotic form")]
    NonPositiveSupport { n: u64, value: f64 },

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("layer `{layer}`: {message}")]
    Shape { layer: String, message: String },

    #[error("quantization config: {0}")]
    Config(String),

    #[error("layer `{layer}`: {source}")]
    Layer {
        layer: String,
        #[source]
        source: Box<Error>,
    },

    #[error("tuning layer `{layer}` at FL {fl}: {source}")]
    Tuning {
        layer: String,
        fl: i32,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    /// 1 for quantization-domain errors, 2 for I/O and parse errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } => 2,
            Error::Layer { source, .. } | Error::Tuning { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub(crate) fn in_layer(self, layer: impl Into<String>) -> Error {
        Error::Layer {
            layer: layer.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Error {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
