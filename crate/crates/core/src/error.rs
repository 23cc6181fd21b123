use thiserror::Error;

/// Errors raised by the state constructors, solvers and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("subsystem index {index} out of range for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("partial trace needs a nonempty set of subsystems to keep")]
    EmptyKeepSet,

    #[error("matrix is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("state is not normalized (trace = {trace})")]
    NotNormalized { trace: f64 },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("photon cutoff {cutoff} too small: neglected weight {tail:e} exceeds {limit:e}")]
    CutoffTooSmall { cutoff: usize, tail: f64, limit: f64 },

    #[error("photon number {needed} overflows mode cutoff {cutoff} on a populated level")]
    PhotonOverflow { needed: usize, cutoff: usize },

    #[error("target success probability {p_target} is unattainable at transmission {eta}")]
    Unattainable { p_target: f64, eta: f64 },

    #[error("state has zero weight: {0}")]
    ZeroTrace(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
