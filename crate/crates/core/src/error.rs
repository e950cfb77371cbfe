use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Diagnostics carried by a fit that stopped without meeting its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub alpha: Vec<f64>,
    pub loglik: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("malformed interval at data row {row}: {message}")]
    MalformedInterval { row: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("no events in sample")]
    NoEvents,

    #[error("leave-one-out sample without subject {0} has no events")]
    NoEventsLeaveOut(usize),

    #[error("invalid time {0}: must be finite and nonnegative")]
    InvalidTime(f64),

    #[error("invalid tau {0}: must be positive")]
    InvalidTau(f64),

    #[error("invalid cut grid: {0}")]
    InvalidCuts(String),

    #[error("invalid rate vector: {0}")]
    InvalidRates(String),

    #[error("interval ({left}, {right}] has zero probability under the model")]
    DegenerateInterval { left: f64, right: f64 },

    #[error(
        "Newton-Raphson did not converge after {} iterations (gradient norm {:.3e})",
        .0.iterations,
        .0.grad_norm
    )]
    DidNotConverge(FitDiagnostics),

    #[error("rate parameters diverged: {detail}")]
    NonIdentifiable { pieces: Vec<usize>, detail: String },

    #[error("observed information is singular (condition number {condition:.3e})")]
    SingularInformation { condition: f64 },

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable name of the variant, used for machine-readable error prefixes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::MalformedInterval { .. } => "MalformedInterval",
            Error::EmptyInput => "EmptyInput",
            Error::NoEvents => "NoEvents",
            Error::NoEventsLeaveOut(_) => "NoEvents",
            Error::InvalidTime(_) => "InvalidTime",
            Error::InvalidTau(_) => "InvalidTau",
            Error::InvalidCuts(_) => "InvalidCuts",
            Error::InvalidRates(_) => "InvalidRates",
            Error::DegenerateInterval { .. } => "DegenerateInterval",
            Error::DidNotConverge(_) => "DidNotConverge",
            Error::NonIdentifiable { .. } => "NonIdentifiable",
            Error::SingularInformation { .. } => "SingularInformation",
            Error::SingularDesign => "SingularDesign",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Io(_) => "Io",
        }
    }

    /// True for errors caused by malformed input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::MalformedInterval { .. }
                | Error::EmptyInput
                | Error::InvalidTime(_)
                | Error::InvalidTau(_)
                | Error::InvalidCuts(_)
                | Error::InvalidRates(_)
                | Error::DimensionMismatch(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
