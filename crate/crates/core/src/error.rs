use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The kernel mass around a conditioning point is too small to estimate anything there.
    #[error("insufficient local data at {point}: kernel weight {weight:.3e} below required {required:.3e}")]
    InsufficientLocalData {
        point: f64,
        weight: f64,
        required: f64,
    },

    #[error("horizon {horizon}: {rejected} of {total} replications left the estimable region")]
    ExcessiveRejection {
        horizon: usize,
        rejected: usize,
        total: usize,
    },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    /// Source autocovariances are (numerically) proportional, so the mixing is not identified.
    #[error("degenerate dynamics: autocovariance design has condition number {condition_number:.3e}")]
    DegenerateDynamics { condition_number: f64 },

    #[error("no admissible solution: {0}")]
    NoSolution(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidInput(_) => "invalid_input",
            Error::InsufficientLocalData { .. } => "insufficient_local_data",
            Error::ExcessiveRejection { .. } => "excessive_rejection",
            Error::RankDeficient(_) => "rank_deficient",
            Error::DegenerateDynamics { .. } => "degenerate_dynamics",
            Error::NoSolution(_) => "no_solution",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid_input(format!("{what}: non-finite entry at index {i}")));
    }
    Ok(())
}
