use thiserror::Error;

/// Errors raised by the analysis and simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error("invalid value for `{field}`: {constraint}")]
    Invalid { field: String, constraint: String },

    #[error("no base station inside the simulation window")]
    EmptyNetwork,

    #[error("aging coefficient |delta| = {delta:e} is too close to zero for the delayed ZF precoder")]
    AgingDomain { delta: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (estimated error {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid override `{0}`")]
    InvalidOverride(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Invalid { .. } | Error::UnknownPreset(_) | Error::InvalidOverride(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
