use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// Condition R: the drift must stay strictly positive where it is evaluated.
    #[error("regularity violation: S(θ={theta}, x={x}) = {value} is not strictly positive")]
    Regularity { theta: f64, x: f64, value: f64 },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("normalization failure: ∫g² = {integral}, expected 1")]
    Normalization { integral: f64 },

    #[error("Fredholm kernel singular at t = {t}: denominator {denominator}")]
    KernelSingularity { t: f64, denominator: f64 },

    /// φ₂ must be strictly positive on the transform range.
    #[error("φ₂ = {value} is not strictly positive at r = {r}")]
    Positivity { r: f64, value: f64 },

    #[error("index {index} out of range for grid with {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("quantile table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
