use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of a function.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// An iterative or series evaluation did not reach its tolerance.
    #[error("non-convergence in {what}: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    /// Moment matching is undefined because the variance is not positive.
    #[error("degenerate moments: variance {variance:e} is not positive")]
    DegenerateMoments { variance: f64 },

    /// The BLER linearization does not apply to the packet parameters.
    #[error("linearization invalid: {detail}")]
    Linearization { detail: String },

    /// A configuration field failed validation.
    #[error("invalid configuration field `{field}`: {detail}")]
    Config { field: String, detail: String },

    /// A search bracket did not contain a solution.
    #[error("bracket failure: {detail}")]
    Bracket { detail: String },

    /// Not enough data for the requested statistic.
    #[error("insufficient data: {detail}")]
    InsufficientData { detail: String },
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    pub(crate) fn nonconv(what: &'static str, detail: impl Into<String>) -> Self {
        Error::NonConvergence {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            detail: detail.into(),
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::NonConvergence { .. } => "non_convergence",
            Error::DegenerateMoments { .. } => "degenerate_moments",
            Error::Linearization { .. } => "linearization",
            Error::Config { .. } => "config",
            Error::Bracket { .. } => "bracket",
            Error::InsufficientData { .. } => "insufficient_data",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
