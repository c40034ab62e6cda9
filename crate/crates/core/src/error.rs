use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} is invalid: need a power of two between 8 and 1024")]
    InvalidGrid(usize),
    #[error("three-parameter input is not delta-exact (defect {defect:.3e} > tolerance {tolerance:.3e})")]
    NotExact { defect: f64, tolerance: f64 },
    #[error("exponent {0} out of range: sewing needs mu > 1")]
    ExponentOutOfRange(f64),
    #[error("degenerate curve: segment {0} has zero length")]
    DegenerateCurve(usize),
    #[error("grid mismatch: expected {expected} nodes, got {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("controlled curves are built over different rough paths")]
    BaseMismatch,
    #[error("Hoelder exponent {nu} too low: {requirement}")]
    ExponentTooLow { nu: f64, requirement: &'static str },
    #[error("map provides derivatives to order {available}, need {required}")]
    InsufficientSmoothness { available: usize, required: usize },
    #[error("derivative order {requested} unsupported (max {max})")]
    OrderUnsupported { requested: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("blow-up suspected at t = {t}: |gamma'| = {norm:.3e} exceeds {limit:.3e}")]
    BlowUpSuspected { t: f64, norm: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
