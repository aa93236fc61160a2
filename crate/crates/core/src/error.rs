use thiserror::Error;

/// Errors raised by the dictionary, generator, solver and theory layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix has no rows or no columns")]
    Empty,
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("column {col} has norm {norm:e}, too small to normalize")]
    ZeroColumn { col: usize, norm: f64 },
    #[error("column {col} has norm {norm}, expected 1 within {tol:e}")]
    NotUnitNorm { col: usize, norm: f64, tol: f64 },
    #[error("coherence is undefined for a single-atom dictionary")]
    SingleAtom,
    #[error("{what} = {value} is outside the valid range [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },
    #[error("coherence is zero: every sparsity level is recoverable")]
    ZeroCoherence,
    #[error("support atoms are numerically dependent (smallest singular value {sigma_min:e})")]
    RankDeficientSupport { sigma_min: f64 },
    #[error("bound is vacuous: mu1(m-1) = {mu1} >= 1")]
    BoundVacuous { mu1: f64 },
    #[error("invalid support: {0}")]
    InvalidSupport(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("residual norm {norm:e} is numerically zero; atom selection is meaningless")]
    ZeroResidual { norm: f64 },
    #[error("update direction is degenerate (||Phi(s - x)|| = {norm:e})")]
    DegenerateDirection { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("selected atoms are numerically dependent (smallest singular value {sigma_min:e})")]
    RankDeficientSelection { sigma_min: f64 },
    #[error("good-atom ratio undefined: on-support correlation {denominator:e} vanishes")]
    UndefinedRatio { denominator: f64 },
    #[error("theoretical condition violated: {0}")]
    ConditionViolated(String),
    #[error("trace does not belong to this instance: {0}")]
    MismatchedTrace(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
