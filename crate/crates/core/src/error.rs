use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("ball enumeration would exceed the element budget of {budget}")]
    BudgetExceeded { budget: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("need at least {needed} radii, got {got}")]
    InsufficientRadii { needed: usize, got: usize },
    #[error("degenerate volume at radius {0}")]
    DegenerateVolume(f64),
    #[error("empty sample set `{0}`")]
    EmptySamples(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quadrature did not reach tolerance {tol:e} (last change {last_change:e})")]
    QuadratureNonConvergence { tol: f64, last_change: f64 },
    #[error("local neighbourhood Q must be a ball centred at the identity")]
    NotCentered,
    #[error("operation not supported for this model: {0}")]
    Unsupported(&'static str),
    #[error("window has zero norm")]
    ZeroWindow,
    #[error("empty point set")]
    EmptyPointSet,
    #[error("assembled matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("frame operator is singular")]
    Singular,
    #[error("vectors are not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("no neighbourhood U with |V_g g| > |g|^2/2 found on the sampling grid")]
    NoNeighbourhood,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(&'static str),
    #[error("certification requested but the field has no modulus bound")]
    MissingModulusBound,
    #[error("section radius {section} too small for hole radius {hole} with margin {margin}")]
    SectionTooSmall { section: f64, hole: f64, margin: f64 },
    #[error("missing error-integral record for radius {0}")]
    MissingRecord(f64),
    #[error("precondition failed: {0}")]
    Precondition(&'static str),
    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,
}
