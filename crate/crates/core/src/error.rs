use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e}")]
    QuadratureNotConverged { estimate: f64, error: f64 },

    #[error(
        "time integration did not converge: partial sum {partial:e}, remaining bound {bound:e}"
    )]
    IntegrationNotConverged { partial: f64, bound: f64 },

    #[error("order {0} has no rephasing echo")]
    NoEcho(String),

    #[error("Fock cutoff too small: {0}")]
    Cutoff(String),

    #[error("dataset {index}: {source}")]
    Dataset {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fit did not converge (best cost {best_cost:e} at {best_params:?})")]
    FitNotConverged { best_cost: f64, best_params: Vec<f64> },

    #[error("data carry no information about the free parameters")]
    ZeroSensitivity,

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Whether the error comes from a numerical routine rather than bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::QuadratureNotConverged { .. }
            | Error::IntegrationNotConverged { .. }
            | Error::FitNotConverged { .. }
            | Error::ZeroSensitivity
            | Error::Cutoff(_) => true,
            Error::Dataset { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
