use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {what} at t={index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid probability level {name}={value}; must lie in (0, 1)")]
    InvalidLevel { name: &'static str, value: f64 },
    #[error("unknown model variant `{0}`")]
    UnknownVariant(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("parameter vector has length {got}, model expects {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("covariate mask references z[{index}] but the series has {available} covariates")]
    MissingCovariate { index: usize, available: usize },
    #[error("lagged VaR path required by the CoVaR equation was not supplied")]
    MissingVarPath,
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite model path at t={index} (explosive parameters?)")]
    Explosive { index: usize },
    #[error("too few VaR exceedances: {got} < {needed}")]
    TooFewExceedances { needed: usize, got: usize },
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error("bandwidth domain error: {0}")]
    BandwidthDomain(String),
    #[error("degenerate bandwidth: {0}")]
    DegenerateBandwidth(String),
    #[error("matrix {name} is singular or ill-conditioned (condition number {condition:e})")]
    Singular { name: &'static str, condition: f64 },
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient Monte Carlo draws: {0}")]
    InsufficientDraws(String),
    #[error("zero long-run variance in score differences")]
    DegenerateVariance,
    #[error("csv error: {0}")]
    Csv(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by numerics (optimizer, singular matrices,
    /// explosive paths) rather than invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Explosive { .. }
                | Error::Optimizer(_)
                | Error::Singular { .. }
                | Error::NotPositiveDefinite(_)
                | Error::DegenerateBandwidth(_)
                | Error::BandwidthDomain(_)
                | Error::DegenerateVariance
                | Error::TooFewExceedances { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
