use thiserror::Error;

/// Why a matrix was rejected as a nonsingular M-matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum NotMReason {
    PositiveOffDiagonal { row: usize, col: usize, value: f64 },
    Singular,
    NegativeInverseEntry { row: usize, col: usize, value: f64 },
    NonPositiveDiagonal { row: usize, value: f64 },
}

impl std::fmt::Display for NotMReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::PositiveOffDiagonal { row, col, value } => {
                write!(f, "positive off-diagonal entry {value:e} at ({row}, {col})")
            }
            Self::Singular => write!(f, "matrix is singular"),
            Self::NegativeInverseEntry { row, col, value } => {
                write!(f, "inverse has negative entry {value:e} at ({row}, {col})")
            }
            Self::NonPositiveDiagonal { row, value } => {
                write!(f, "non-positive diagonal entry {value:e} at row {row}")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is singular (pivot {pivot:e} below threshold {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },
    #[error("not a nonsingular M-matrix: {0}")]
    NotMMatrix(NotMReason),
    #[error("dimension {n} exceeds the cap of {cap}")]
    DimensionTooLarge { n: usize, cap: usize },
    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },
    #[error("series truncation infeasible: {0}")]
    TruncationInfeasible(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("hypothesis failed at row {row}: {detail}")]
    HypothesisFailed { row: usize, detail: String },
    #[error("asymmetry too large: minimal feasible constant is {min_c}")]
    AsymmetryTooLarge { min_c: f64 },
    #[error("kernel diagonal is not constant")]
    NotConstantDiagonal,
    #[error("sigma^2 vanishes at ({row}, {col}) while the kernel is asymmetric there")]
    DegenerateSigma { row: usize, col: usize },
    #[error("kernel is not symmetric")]
    NotSymmetric,
    #[error("quadrature failed: {detail} (residual estimate {residual:e})")]
    QuadratureFailure { detail: String, residual: f64 },
    #[error("spectral density is not integrable: {0}")]
    NotIntegrable(String),
    #[error("parameters out of range: {0}")]
    OutOfRange(String),
    #[error("chain is not transient (spectral radius {radius})")]
    NotTransient { radius: f64 },
}

impl Error {
    /// True for errors that mean "the input failed validation" rather than
    /// an internal numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotMMatrix(_)
                | Error::SingularMatrix { .. }
                | Error::InvalidInput(_)
                | Error::PreconditionViolated(_)
                | Error::HypothesisFailed { .. }
                | Error::AsymmetryTooLarge { .. }
                | Error::NotConstantDiagonal
                | Error::DegenerateSigma { .. }
                | Error::NotSymmetric
                | Error::NotIntegrable(_)
                | Error::OutOfRange(_)
                | Error::NotTransient { .. }
                | Error::DimensionTooLarge { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
