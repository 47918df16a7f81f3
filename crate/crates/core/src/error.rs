use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cutoff {cutoff} too small: retained norm^2 = {norm_sqr:.3e}")]
    CutoffTooSmall { cutoff: usize, norm_sqr: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-unitary beam splitter coefficients: |t|^2 + |r|^2 = {norm_sqr}")]
    NonUnitary { norm_sqr: f64 },

    #[error("projection outcome has zero probability ({probability:.3e})")]
    ZeroProbability { probability: f64 },

    #[error("degenerate beam splitters: both output amplitudes vanish")]
    DegenerateBeamSplitter,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("lambda = 0 is outside the dissipative propagator's domain")]
    Lossless,

    #[error("cutoff leakage {leakage:.3e} exceeds tolerance {tolerance:.1e}")]
    CutoffLeakage { leakage: f64, tolerance: f64 },

    #[error("non-finite value encountered during {0}")]
    NonFinite(&'static str),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
