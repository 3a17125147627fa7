//! Probability models known up to normalization.
//!
//! Every model exposes its score `∇ₓ log p`, the Laplacian `Δₓ log p` and the
//! Hyvärinen score `½‖∇ₓ log p‖² + Δₓ log p`. None of these touch the
//! normalizing constant.

mod fisher;
mod gaussian;
mod gbrbm;
mod gmm;
mod mixture;

pub use fisher::{fisher_gaussian, fisher_mc, fisher_on_samples};
pub use gaussian::Gaussian;
pub use gbrbm::Gbrbm;
pub use gmm::GaussianMixture;
pub use mixture::{hutchinson_laplacian, BetaWeights, ScoreMixture, DEFAULT_PROBES};

pub(crate) use gaussian::{matrix_from_rows, rows_of};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_point, Result};
use crate::stats::norm_sq;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScoreModel {
    Gaussian(Gaussian),
    Gmm(GaussianMixture),
    Gbrbm(Gbrbm),
    ScoreMixture(ScoreMixture),
}

impl From<Gaussian> for ScoreModel {
    fn from(g: Gaussian) -> Self {
        ScoreModel::Gaussian(g)
    }
}

impl From<GaussianMixture> for ScoreModel {
    fn from(m: GaussianMixture) -> Self {
        ScoreModel::Gmm(m)
    }
}

impl From<Gbrbm> for ScoreModel {
    fn from(g: Gbrbm) -> Self {
        ScoreModel::Gbrbm(g)
    }
}

impl From<ScoreMixture> for ScoreModel {
    fn from(m: ScoreMixture) -> Self {
        ScoreModel::ScoreMixture(m)
    }
}

impl ScoreModel {
    pub fn dim(&self) -> usize {
        match self {
            ScoreModel::Gaussian(g) => g.dim(),
            ScoreModel::Gmm(m) => m.dim(),
            ScoreModel::Gbrbm(g) => g.visible(),
            ScoreModel::ScoreMixture(m) => m.dim(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ScoreModel::Gaussian(_) => "gaussian",
            ScoreModel::Gmm(_) => "gmm",
            ScoreModel::Gbrbm(_) => "gbrbm",
            ScoreModel::ScoreMixture(_) => "score_mixture",
        }
    }

    pub fn as_gaussian(&self) -> Option<&Gaussian> {
        match self {
            ScoreModel::Gaussian(g) => Some(g),
            _ => None,
        }
    }

    pub fn supports_sampling(&self) -> bool {
        !matches!(self, ScoreModel::ScoreMixture(_))
    }

    /// Whether [`ScoreModel::laplacian`] is deterministic (no probe noise).
    pub fn has_exact_laplacian(&self) -> bool {
        match self {
            ScoreModel::ScoreMixture(m) => m.has_exact_laplacian(),
            _ => true,
        }
    }

    pub(crate) fn score_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ScoreModel::Gaussian(g) => g.score_into(x, out),
            ScoreModel::Gmm(m) => m.score_into(x, out),
            ScoreModel::Gbrbm(g) => g.score_into(x, out),
            ScoreModel::ScoreMixture(m) => m.score_into(x, out),
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, self.dim())?;
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn laplacian_unchecked<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        match self {
            ScoreModel::Gaussian(g) => g.laplacian(),
            ScoreModel::Gmm(m) => m.laplacian_unchecked(x),
            ScoreModel::Gbrbm(g) => g.laplacian_unchecked(x),
            ScoreModel::ScoreMixture(m) => m.laplacian_unchecked(x, rng),
        }
    }

    /// `Δₓ log p(x)`. Exact for every family except network-weighted score
    /// mixtures, which fall back to Hutchinson probes drawn from `rng`.
    pub fn laplacian<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        check_point(x, self.dim())?;
        Ok(self.laplacian_unchecked(x, rng))
    }

    pub(crate) fn hyvarinen_unchecked<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let mut s = vec![0.0; self.dim()];
        self.score_into(x, &mut s);
        0.5 * norm_sq(&s) + self.laplacian_unchecked(x, rng)
    }

    pub fn hyvarinen<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        check_point(x, self.dim())?;
        Ok(self.hyvarinen_unchecked(x, rng))
    }

    /// Log of the unnormalized density, where one exists in closed form.
    ///
    /// Network-weighted score mixtures are score fields with no known
    /// potential and return `None`.
    pub fn log_unnormalized(&self, x: &[f64]) -> Option<f64> {
        match self {
            ScoreModel::Gaussian(g) => Some(g.log_unnormalized(x)),
            ScoreModel::Gmm(m) => Some(m.log_density(x)),
            ScoreModel::Gbrbm(g) => Some(-g.energy(x)),
            ScoreModel::ScoreMixture(m) => m.log_unnormalized(x),
        }
    }
}
