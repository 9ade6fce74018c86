use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator dimension must be at least 2, found {0}")]
    DimensionTooSmall(usize),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("model has no jump channels")]
    EmptyChannels,

    #[error("negative rate parameter {name} = {value}")]
    NegativeRate { name: &'static str, value: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("transition {to}<-{from} assigned to more than one group")]
    GroupConflict { to: usize, from: usize },

    #[error("liouvillian has a {0}-dimensional zero eigenspace; a unique steady state is required")]
    NonErgodicModel(usize),

    #[error("liouvillian is not diagonalizable (eigenvector matrix condition {0:.3e})")]
    NonDiagonalizable(f64),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("state is singular: smallest eigenvalue {0:.3e}")]
    SingularState(f64),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("channel {0} is not reverse-paired")]
    UnpairedChannel(usize),

    #[error("exceeded {0} jumps in a single trajectory")]
    DivergingRate(usize),

    #[error("segment probability {0:.3e} underflowed")]
    Underflow(f64),

    #[error("propagator argument t*|H_eff| = {0:.3e} exceeds the overflow guard")]
    PropagatorOverflow(f64),

    #[error("unknown channel id {0}")]
    UnknownChannel(usize),

    #[error("observable {0}: {1}")]
    InvalidObservable(usize, String),

    #[error("relative fluctuation undefined: mean of observable {index} is {mean:.4e} with standard error {se:.4e}")]
    RelativeFluctuationUndefined { index: usize, mean: f64, se: f64 },

    #[error("need at least {required} samples, found {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("bounds are defined for exactly two groups, model has {0}")]
    UnsupportedGroupCount(usize),

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid sampler configuration: {0}")]
    InvalidSampler(String),
}

pub type Result<T> = std::result::Result<T, Error>;
