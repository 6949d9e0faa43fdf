use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid kernel support [{a}, {b}]: need b > a")]
    InvalidKernel { a: f64, b: f64 },

    #[error("unknown model '{0}' (expected traffic_forward, traffic_backward, tv_example or limit_family)")]
    UnknownModel(String),

    #[error("invalid datum: {0}")]
    InvalidDatum(String),

    #[error("convolution window underflow at interface {interface}: ghost width {ghost_width} too small")]
    WindowUnderflow { interface: usize, ghost_width: usize },

    #[error("numerical blowup at step {step}, cell {cell}: value {value}")]
    NumericalBlowup { step: usize, cell: usize, value: f64 },

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("CFL: lambda {lambda} > lambda* {lambda_star:.4}")]
    Cfl { lambda: f64, lambda_star: f64 },

    #[error("mesh condition: h {h} >= 1/C with C = {c}")]
    MeshCondition { h: f64, c: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Config(_)
            | Error::UnknownModel(_)
            | Error::InvalidDatum(_)
            | Error::InvalidGeometry(_)
            | Error::InvalidKernel { .. } => 2,
            Error::Cfl { .. } | Error::MeshCondition { .. } => 3,
            Error::NumericalBlowup { .. } => 4,
            Error::InvariantViolation(_) => 5,
            Error::WindowUnderflow { .. } | Error::Misuse(_) | Error::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
