use thiserror::Error;

/// Errors produced by the model, estimation and search routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The observation has probability zero from the current information state.
    #[error("observation {obs} has zero probability under process {proc} (denominator {denominator:e})")]
    ZeroProbabilityObservation { proc: usize, obs: usize, denominator: f64 },

    #[error("no fixed point in (0,1) for r{proc}")]
    NumericalFailure { proc: usize },

    #[error("no L with r0^L(0) > r1^L(1) within {cap} iterations")]
    LNotFound { cap: usize },

    /// Both orbits stay inside the region of their own anchor, so the
    /// information chain splits in two and the entropy formula has a zero
    /// denominator.
    #[error("degenerate denominator: each orbit stays in its own region (reducible chain)")]
    DegenerateDenominator,

    #[error("iteration cap {cap} reached with bound {bound:e} above tolerance")]
    IterationCap { cap: usize, bound: f64 },

    #[error("greedy comparison changes sign {count} times on (0,1)")]
    MultipleCrossings { count: usize },

    #[error("local search stopped after {cap} passes without converging")]
    PassCap { cap: usize },

    /// A truncated policy is only defined on orbit points.
    #[error("policy is defined on orbit points only; tabulate it against a model first")]
    NotPointwise,

    #[error("policy syntax: {0}")]
    PolicySyntax(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable code, used in CSV rows and CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::ZeroProbabilityObservation { .. } => "ZeroProbabilityObservation",
            Error::NumericalFailure { .. } => "NumericalFailure",
            Error::LNotFound { .. } => "LNotFound",
            Error::DegenerateDenominator => "DegenerateDenominator",
            Error::IterationCap { .. } => "IterationCap",
            Error::MultipleCrossings { .. } => "MultipleCrossings",
            Error::PassCap { .. } => "PassCap",
            Error::NotPointwise => "NotPointwise",
            Error::PolicySyntax(_) => "PolicySyntax",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
