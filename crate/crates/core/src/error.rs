use thiserror::Error;

/// Errors produced by kernel construction, forward simulation and inversion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid attenuation law: {0}")]
    InvalidLaw(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid does not resolve the kernel: {0}")]
    Resolution(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("argument out of range: {0}")]
    Range(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("discrepancy bracket failure: {0}")]
    BracketFailure(String),

    #[error("interpolation out of range: {0}")]
    InterpolationOutOfRange(String),

    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of a numerical guard (resolution, quadrature,
    /// bracket) as opposed to invalid inputs or I/O.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Resolution(_)
                | Error::QuadratureNonConvergence(_)
                | Error::BracketFailure(_)
                | Error::InterpolationOutOfRange(_)
        )
    }
}
