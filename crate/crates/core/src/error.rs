use thiserror::Error;

/// Errors raised by the model, spectral and dynamics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected} sites, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("traveling wave at q = {q} does not exist (kappa = {kappa} <= gamma_q = {gamma_q})")]
    WaveDoesNotExist { q: f64, kappa: f64, gamma_q: f64 },

    #[error("index {index} out of range 0..{len}")]
    OutOfRange { index: usize, len: usize },

    #[error("maximal-asymmetry degenerate case: one hopping amplitude vanishes and the spectrum is N-fold degenerate")]
    DegenerateHopping,

    #[error("trajectory diverged at step {step} (t = {time}, max |alpha| = {amplitude:e})")]
    Divergence { step: u64, time: f64, amplitude: f64 },

    #[error("non-finite value encountered at step {step} (t = {time})")]
    NonFinite { step: u64, time: f64 },

    #[error("no static condensate found: {0}")]
    NoStaticCondensate(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("renormalization underflow: all tangent norms below 1e-300")]
    TangentUnderflow,

    #[error("window too short: {0}")]
    WindowTooShort(String),

    #[error("not converged: {0}")]
    NotConverged(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NonFinite { .. }
                | Error::NoStaticCondensate(_)
                | Error::Eigen(_)
                | Error::TangentUnderflow
                | Error::NotConverged(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
