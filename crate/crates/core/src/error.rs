use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input at coordinate {0}")]
    NonFinite(usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariances differ; use fisher_mc for general Gaussian pairs")]
    CovarianceMismatch,

    #[error("model of type `{0}` has no sampler")]
    NoSampler(&'static str),

    #[error("langevin step produced a non-finite value for particle {0}; lower the step size")]
    LangevinDiverged(usize),

    #[error("polytopes are not disjoint (minimum V-norm distance {0:e})")]
    NotDisjoint(f64),

    #[error("training diverged at epoch {0}: non-finite loss; try a lower learning rate")]
    TrainingDiverged(usize),

    #[error("nearness assumption violated: pre-change drift {drift} is not negative")]
    PositiveDrift { drift: f64 },

    #[error("moment generating function overflow: max exponent {0}")]
    MgfOverflow(f64),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}
