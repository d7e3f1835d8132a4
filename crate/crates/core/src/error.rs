use thiserror::Error;

/// Errors raised by the numerical kernels and the file-format layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("frequency {0} is outside (0, 1)")]
    FrequencyOutOfRange(f64),

    #[error("{p}/{q} is not in lowest terms")]
    NotCoprime { p: i64, q: i64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cocycle pole at x = {x} (cos 2\u{3c0}x = 0 on the real torus)")]
    Pole { x: f64 },

    #[error("pole hit on the orbit for every resampled phase ({attempts} attempts)")]
    PersistentPole { attempts: usize },

    #[error("quadrature did not converge: estimates {coarse} and {fine} differ")]
    Quadrature { coarse: f64, fine: f64 },

    #[error("eigensolver failed on a {dim}x{dim} matrix: {reason}")]
    Eigensolver { dim: usize, reason: String },

    #[error("grid of size {grid} is too small for support length {support}")]
    GridTooSmall { grid: usize, support: usize },

    #[error("dual field is identically zero")]
    ZeroField,

    #[error("empty spectrum estimate")]
    EmptySpectrum,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
