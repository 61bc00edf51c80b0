use thiserror::Error;

/// Every failure the engine can report.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`])
/// which the command-line front end prints and turns into an exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("voter {voter} has negative weight {value} on project {project}")]
    NegativeWeight {
        voter: usize,
        project: usize,
        value: f64,
    },
    #[error("voter {voter} has non-finite weight on project {project}")]
    NonFiniteWeight { voter: usize, project: usize },
    #[error("voter {voter} casts an empty ballot")]
    EmptyBallot { voter: usize },
    #[error("voter {voter} spends {total} which exceeds the unit endowment")]
    Overspent { voter: usize, total: f64 },
    #[error("shape mismatch: expected length {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("phantom search did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
    #[error("regression failure in example '{example}': {detail}")]
    RegressionFailure { example: String, detail: String },
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NegativeWeight { .. } => "NEGATIVE_WEIGHT",
            Error::NonFiniteWeight { .. } => "NON_FINITE_WEIGHT",
            Error::EmptyBallot { .. } => "EMPTY_BALLOT",
            Error::Overspent { .. } => "OVERSPENT",
            Error::ShapeMismatch { .. } => "SHAPE_MISMATCH",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::Io(_) => "IO_ERROR",
            Error::DegenerateProfile(_) => "DEGENERATE_PROFILE",
            Error::InvalidParameter(_) => "INVALID_PARAMETER",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::TargetUnreachable(_) => "TARGET_UNREACHABLE",
            Error::PreconditionUnmet(_) => "PRECONDITION_UNMET",
            Error::RegressionFailure { .. } => "REGRESSION_FAILURE",
            Error::Config(_) => "CONFIG_ERROR",
        }
    }

    /// Process exit status used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 3,
            Error::NegativeWeight { .. }
            | Error::NonFiniteWeight { .. }
            | Error::EmptyBallot { .. }
            | Error::Overspent { .. }
            | Error::ShapeMismatch { .. } => 4,
            Error::Io(_) => 5,
            Error::Config(_) | Error::InvalidParameter(_) | Error::IndexOutOfRange { .. } => 6,
            Error::DegenerateProfile(_) => 7,
            Error::TargetUnreachable(_) | Error::PreconditionUnmet(_) => 8,
            Error::NoConvergence { .. } => 9,
            Error::RegressionFailure { .. } => 10,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
