//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by how
//! the CLI maps them to exit codes: configuration problems (exit 2), physics
//! and runtime failures (exit 3), and I/O failures (exit 4).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands live on different composite layouts or have wrong dimensions.
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A state has support outside the subspace an operation requires.
    #[error("state support: {0}")]
    StateSupport(String),

    /// A parameter combination makes a formula singular (e.g. zero detuning).
    #[error("singular parameter: {0}")]
    Singularity(String),

    /// Physically impossible inputs (negative rates, T2 > 2 T1, ...).
    #[error("unphysical input: {0}")]
    Unphysical(String),

    /// Device or scenario configuration is inconsistent with the request.
    #[error("configuration: {0}")]
    Configuration(String),

    /// An integration would exceed its step budget.
    #[error("step budget exceeded: {0}")]
    StepBudget(String),

    /// The integrator produced a state outside its quality tolerances.
    #[error("integration quality: {0}")]
    IntegrationQuality(String),

    /// Oscillation fit did not converge or the series carries no oscillation.
    #[error("fit failed: {0}")]
    Fit(String),

    /// Scenario file could not be parsed or validated.
    #[error("config: {0}")]
    Config(String),

    /// File I/O failure, with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Configuration(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
