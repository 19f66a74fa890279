use thiserror::Error;

/// Errors raised by the compositional regression routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("part {index} is not strictly positive (value {value})")]
    NonPositivePart { index: usize, value: f64 },

    #[error("a composition needs at least 2 parts, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("clr vector does not sum to zero (sum = {0:e})")]
    NotInHyperplane(f64),

    #[error("bandwidth matrix is not symmetric positive definite")]
    SingularBandwidth,

    #[error("covariance matrix is not symmetric positive definite")]
    SingularCovariance,

    #[error("every kernel weight underflowed to zero; bandwidth too small for this query point")]
    AllWeightsZero,

    #[error("weighted design matrix is singular or ill-conditioned (condition number {0:e})")]
    SingularDesign(f64),

    #[error("robust scale is zero")]
    ZeroScale,

    #[error("scale equation has no root: too little mass on nonzero residuals")]
    NoBracket,

    #[error("gamma draw underflowed to zero after {0} attempts")]
    DegenerateDraw(usize),

    #[error("training fold is empty or yields no usable prediction")]
    FoldTooSmall,

    #[error("every bandwidth candidate failed on more than {0}% of the cross-validation predictions")]
    NoUsableBandwidth(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
