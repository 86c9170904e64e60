use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: String,
        right: String,
    },
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("Hermitian eigen-decomposition did not converge")]
    EigenNonConvergence,
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid measurement pattern: {0}")]
    InvalidPattern(String),
    #[error("assumption (A1) violated: l[{i}] == l[{j}] == {value}")]
    DegenerateSpectrum { i: usize, j: usize, value: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model has no x-type channel")]
    MissingXChannel,
    #[error("projection failure at t={t}: eigenvalue {min_eigenvalue:e} before clipping (step too large)")]
    ProjectionFailure { t: f64, min_eigenvalue: f64 },
    #[error("trajectory {trajectory} aborted: {source}")]
    TrajectoryAborted {
        trajectory: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("config error{}: {message}", at_line(*line))]
    Config { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotHermitian { .. }
            | Error::NonFinite
            | Error::EigenNonConvergence
            | Error::ProjectionFailure { .. } => true,
            Error::TrajectoryAborted { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
