use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("block `{0}` of the partitioned matrix is singular")]
    SingularBlock(&'static str),

    #[error("spectrum is not real (imaginary part {0:e})")]
    ComplexSpectrum(f64),

    #[error("state is unphysical: {0}")]
    Unphysical(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("channel kernel Γ̃₂ + γ is singular")]
    SingularKernel,

    #[error("matrix is not symplectic (residual {0:e})")]
    NotSymplectic(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no sample pair passed post-selection")]
    NoAcceptedSamples,

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("Fock truncation discards probability mass {0:e}")]
    TailTooHeavy(f64),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("state file: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
