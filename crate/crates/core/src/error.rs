use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("observation has zero likelihood under every parameter")]
    AllZeroLikelihood,

    #[error(
        "information vanishes (denominator {denominator:e}) while regret does not (numerator {numerator:e})"
    )]
    DegenerateInformation { numerator: f64, denominator: f64 },

    #[error("representation inconsistent with belief: {0}")]
    InconsistentRepresentation(String),

    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("epsilon {epsilon} must be below phi(delta) - 1/2 = {limit}")]
    EpsilonTooLarge { epsilon: f64, limit: f64 },

    #[error("classification margin {margin} is below delta {delta}")]
    MarginViolated { margin: f64, delta: f64 },

    #[error("no feasible two-point mixture found (non-finite input?)")]
    Infeasible,

    #[error("exhaustive search limited to {limit} parameters, got {m}")]
    TooLarge { m: usize, limit: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("partition certificate violated: distortion {distortion} exceeds epsilon {epsilon}")]
    CertificateViolated { distortion: f64, epsilon: f64 },

    #[error("instance too large for exact audit: {work} > {limit}")]
    GuardExceeded { work: usize, limit: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::InvalidInstance(_) => "InvalidInstance",
            Error::InvalidPmf(_) => "InvalidPmf",
            Error::AllZeroLikelihood => "AllZeroLikelihood",
            Error::DegenerateInformation { .. } => "DegenerateInformation",
            Error::InconsistentRepresentation(_) => "InconsistentRepresentation",
            Error::InvalidEpsilon(_) => "InvalidEpsilon",
            Error::EpsilonTooLarge { .. } => "EpsilonTooLarge",
            Error::MarginViolated { .. } => "MarginViolated",
            Error::Infeasible => "Infeasible",
            Error::TooLarge { .. } => "TooLarge",
            Error::UnsupportedModel(_) => "UnsupportedModel",
            Error::CertificateViolated { .. } => "CertificateViolated",
            Error::GuardExceeded { .. } => "GuardExceeded",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
