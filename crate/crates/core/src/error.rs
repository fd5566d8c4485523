use thiserror::Error;

/// Errors raised anywhere in the simulation and optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data for {model}: need at least {required}, got {actual}")]
    InsufficientData {
        model: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("infeasible load: {required_kw:.3} kW exceeds coil capacity {capacity_kw:.3} kW")]
    InfeasibleLoad { required_kw: f64, capacity_kw: f64 },

    #[error("rank-deficient regression: {0}")]
    RankDeficient(String),

    #[error("missing model store `{0}`")]
    MissingModel(String),

    #[error("model store: {0}")]
    ModelStore(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config: {0}")]
    Config(String),

    /// One or more sub-models could not be calibrated.
    #[error("calibration failed: {}", join(.0))]
    Calibration(Vec<Error>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors that originate in model persistence rather than data.
    pub fn is_model_store(&self) -> bool {
        matches!(self, Error::MissingModel(_) | Error::ModelStore(_))
    }
}

fn join(errors: &[Error]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
