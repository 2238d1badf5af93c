use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),

    #[error("invalid moment summary: {0}")]
    InvalidMoments(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("quantization step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("every measurement atom has zero probability")]
    EmptySupport,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("the two MMSE forms disagree: direct {direct}, difference {difference}")]
    FormMismatch { direct: f64, difference: f64 },

    #[error("limit measurement covariance is rank deficient (rank {rank} of {dim})")]
    SingularLimitCovariance { rank: usize, dim: usize },

    #[error("scenario has no Markov witness channel")]
    MissingWitness,

    #[error("operation needs an exact (finite) realization")]
    NotExact,

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario `{name}` at {at}: {source}")]
    Scenario {
        name: String,
        at: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_scenario(self, name: &str, at: impl Into<String>) -> Self {
        Error::Scenario {
            name: name.to_string(),
            at: at.into(),
            source: Box::new(self),
        }
    }
}
