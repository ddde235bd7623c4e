use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is not unitary (deviation {0:e})")]
    NonUnitaryInput(f64),
    #[error("input is not Hermitian (deviation {0:e})")]
    NonHermitianInput(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("time {t:e} s outside envelope of duration {duration:e} s")]
    OutOfRange { t: f64, duration: f64 },
    #[error("envelope has zero area")]
    ZeroArea,
    #[error("segment targets transition {0} which this drive cannot realize")]
    BadTransition(&'static str),
    #[error("negative rate: {0}")]
    NegativeRate(String),
    #[error("trace drifted by {0:e}; reduce the step")]
    StepTooLarge(f64),
    #[error("coupling strength must be positive")]
    ZeroCoupling,
    #[error("shot count must be positive")]
    BadShotCount,
    #[error("optimizer did not converge after {iterations} iterations (best cost {cost:e})")]
    ConvergenceFailure { iterations: usize, cost: f64 },
    #[error("input states do not span operator space (rank {0})")]
    SingularInputSpan(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("fit diverged: {0}")]
    FitDivergence(String),
    #[error("parameter not identifiable: {0}")]
    Unidentifiable(String),
    #[error("ratio p_gate/p_ref out of range: {0}")]
    RatioOutOfRange(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
