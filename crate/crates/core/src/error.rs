use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("conditional distribution undefined: P(Y = {y}) is zero under the model")]
    UndefinedConditional { y: u32 },

    #[error("data inconsistent with model support: {0}")]
    InconsistentSupport(String),

    #[error("optimizer did not converge after {iterations} iterations (last iterate lambda2={lambda2}, lambda3={lambda3}, gradient norm {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        lambda2: f64,
        lambda3: f64,
        gradient_norm: f64,
    },

    #[error("information matrix is singular: {0}")]
    SingularInformation(String),

    #[error("dispersion index undefined: {0}")]
    UndefinedIndex(String),

    #[error(
        "series did not reach tolerance within {iterations} terms (partial sum {partial_sum})"
    )]
    Truncation { iterations: usize, partial_sum: f64 },

    #[error("non-positive variance {variance:e} at (t1, t2) = ({t1}, {t2})")]
    NonPositiveVariance { t1: f64, t2: f64, variance: f64 },

    #[error("every grid point has a degenerate variance ({points} points)")]
    EmptyGrid { points: usize },

    #[error(
        "expected probability {probability:e} in cell ({row}, {col}) is too small; try a smaller k"
    )]
    SparseCell {
        row: String,
        col: String,
        probability: f64,
    },

    #[error("invalid setting: {0}")]
    InvalidSetting(String),
}

impl Error {
    /// Whether the error comes from the data rather than from numerics or settings.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptySample(_) | Error::InconsistentSupport(_) | Error::UndefinedIndex(_)
        )
    }

    pub fn is_usage_error(&self) -> bool {
        matches!(self, Error::ParameterDomain(_) | Error::InvalidSetting(_))
    }
}
