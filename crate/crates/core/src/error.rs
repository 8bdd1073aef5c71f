use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("reciprocal of a series that vanishes to its truncation order")]
    ZeroSeries,
    #[error("square root needs an even leading exponent numerator, got {0}")]
    OddLeadingExponent(i64),
    #[error("leading coefficient has no square root in the exact domain")]
    NonSquareLeading,
    #[error("exponent {0} is not on the series grid")]
    OffGrid(String),
    #[error("exponent {exponent} is at or beyond the truncation order {trunc}")]
    BeyondTruncation { exponent: String, trunc: String },
    #[error("unsupported weight {0}")]
    UnsupportedWeight(u32),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point {0} is below the convergence floor {1}")]
    BelowFloor(String, String),
    #[error("truncation error {0} exceeds tolerance {1}")]
    TruncationError(String, String),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("derivative vanishes near {0}")]
    DerivativeCollapse(String),
    #[error("coincident or singular points in system evaluation")]
    SingularPoints,
    #[error("residue estimates at radius {0} and half radius disagree by {1}")]
    NearbyPole(String, String),
    #[error("no solution found")]
    NoSolution,
}

pub type Result<T> = std::result::Result<T, Error>;
