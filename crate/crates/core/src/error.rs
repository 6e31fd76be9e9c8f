use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step parameter gamma = {gamma} must be at least L_max = {l_max}")]
    StepTooSmall { gamma: f64, l_max: f64 },

    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("bracket [{lo}, {hi}] does not contain the minimizer")]
    Bracket { lo: f64, hi: f64 },

    #[error("missing problem metadata: {0}")]
    MissingMetadata(&'static str),

    #[error("trace replay mismatch at update {t}: {detail}")]
    Replay { t: usize, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
