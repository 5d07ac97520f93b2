use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} lies outside the validity window [0, {horizon})")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("term {index} carries no pole tag")]
    UntaggedTerm { index: usize },

    #[error("negative time {0} passed to a causal basis")]
    NegativeTime(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "excitation pole {lambda} collides with the basis pole -{a} (|lambda + a| = {distance:.3e}); \
         perturb the basis rate, e.g. by 1%"
    )]
    PoleCollision {
        lambda: num_complex::Complex64,
        a: f64,
        distance: f64,
    },

    #[error("requested rank {rank} exceeds the Hankel dimension {max}")]
    RankTooLarge { rank: usize, max: usize },

    #[error("decomposition produced a zero signal pole; the record is ill-posed for exponential fitting")]
    ZeroSignalPole,

    #[error("frequency grid is not symmetric about zero: {0}")]
    AsymmetricGrid(String),

    #[error("kernel order mismatch: {0}")]
    OrderMismatch(String),

    #[error(
        "design matrix is rank deficient (numerical rank {rank} of {cols} columns); \
         use a richer excitation such as white noise"
    )]
    RankDeficient { rank: usize, cols: usize },

    #[error("adaptive integrator step fell below {min_step:.3e} at t = {t}")]
    StepUnderflow { t: f64, min_step: f64 },

    #[error("kernel grid does not cover the response horizon: {0}")]
    HorizonOverflow(String),

    #[error("imaginary residue {ratio:.3e} of the output RMS exceeds the tolerance {tolerance:.1e}")]
    ImaginaryResidue { ratio: f64, tolerance: f64 },

    #[error("response has {count} terms after merging, above the structural bound {bound}")]
    TermCountExceeded { count: usize, bound: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
