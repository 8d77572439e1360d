use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site set must be nonempty")]
    EmptySiteSet,
    #[error("duplicate site label {0}")]
    DuplicateSite(i64),
    #[error("site {0} is not part of the site set")]
    UnknownSite(i64),
    #[error("off-diagonal entry A({k},{l}) = {value} is negative")]
    NegativeOffDiagonal { k: i64, l: i64, value: f64 },
    #[error("entry A({k},{l}) given more than once")]
    DuplicateEntry { k: i64, l: i64 },
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("weight decay must lie in (0, 1], got {0}")]
    InvalidDecay(f64),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("point ({u}, {v}) is not in the open quadrant")]
    NotInterior { u: f64, v: f64 },
    #[error("point ({u}, {v}) has a negative or non-finite coordinate")]
    InvalidPoint { u: f64, v: f64 },
    #[error("test function value at site {site} is not on the boundary: ({type1}, {type2})")]
    NotOnBoundary { site: i64, type1: f64, type2: f64 },
    #[error("moment order must lie in (0, 2), got {0}")]
    MomentOrder(f64),
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("time {t} is not on the grid of step {epsilon}")]
    OffGrid { t: f64, epsilon: f64 },
    #[error("window radius {radius} too small for time {t}: leaked mass {leak:e}")]
    WindowTooSmall { radius: usize, t: f64, leak: f64 },
    #[error("configuration has {got} sites, matrix has {expected}")]
    SiteMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, Error>;
