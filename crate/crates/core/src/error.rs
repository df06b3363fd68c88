use thiserror::Error;

/// Errors raised across the library.
///
/// Variants map onto the process exit codes used by the command line
/// harness: validation and domain problems are configuration errors, numeric
/// failures are reported separately so a diverging run is never mistaken for
/// a typo in a config file.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: wrong lengths, non-positive eigenvalues, unknown keys.
    #[error("validation error: {0}")]
    Validation(String),

    /// A parameter lies outside the mathematical domain of an operation.
    #[error("domain error: {name} = {value} (expected {expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// The requested quantity is not defined for this model.
    #[error("ill-posed: {0}")]
    IllPosed(String),

    /// A computation produced a non-finite value.
    #[error("numeric error at step {step}: {message}")]
    Numeric { step: u64, message: String },

    /// Adaptive quadrature stopped before reaching its tolerance.
    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// The configuration asks for something the implementation does not cover.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A sweep would exceed the configured work budget.
    #[error("budget exceeded: estimated {estimated:.3e} coordinate updates, budget {budget:.3e}")]
    Budget { estimated: f64, budget: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }

    /// Exit code used by the command line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric { .. } | Error::Quadrature { .. } => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
