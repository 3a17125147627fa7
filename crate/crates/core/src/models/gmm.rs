use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Gaussian;
use crate::error::{check_point, Error, Result};
use crate::stats::{log_sum_exp, norm_sq};

const WEIGHT_TOL: f64 = 1e-12;

/// Finite mixture `Σ w_i N(mean_i, cov_i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct GaussianMixture {
    components: Vec<Gaussian>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MixtureRepr {
    components: Vec<Gaussian>,
    weights: Vec<f64>,
}

impl TryFrom<MixtureRepr> for GaussianMixture {
    type Error = Error;

    fn try_from(r: MixtureRepr) -> Result<Self> {
        GaussianMixture::new(r.components, r.weights)
    }
}

impl From<GaussianMixture> for MixtureRepr {
    fn from(m: GaussianMixture) -> Self {
        MixtureRepr { components: m.components, weights: m.weights }
    }
}

/// Per-component quantities at one point.
pub(crate) struct Responsibilities {
    pub u: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(components: Vec<Gaussian>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidModel("gmm: no components".into()));
        }
        if components.len() != weights.len() {
            return Err(Error::InvalidModel(format!(
                "gmm: {} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::InvalidModel("gmm: components differ in dimension".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidModel("gmm: weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidModel(format!("gmm: weights sum to {total}")));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { components, weights, log_weights })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Posterior component probabilities `w_i p_i(x) / Σ_j w_j p_j(x)`, in log space.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, self.dim())?;
        Ok(self.responsibilities_unchecked(x))
    }

    fn responsibilities_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_density(x))
            .collect();
        let lse = log_sum_exp(&logs);
        let u: Vec<f64> = logs.iter().map(|l| (l - lse).exp()).collect();
        debug_assert!(u.iter().all(|v| *v >= 0.0));
        debug_assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        u
    }

    pub(crate) fn resolve(&self, x: &[f64]) -> Responsibilities {
        let d = self.dim();
        let u = self.responsibilities_unchecked(x);
        let scores = self
            .components
            .iter()
            .map(|c| {
                let mut s = vec![0.0; d];
                c.score_into(x, &mut s);
                s
            })
            .collect();
        Responsibilities { u, scores }
    }

    pub(crate) fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let r = self.resolve(x);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (ui, si) in r.u.iter().zip(&r.scores) {
            for (o, s) in out.iter_mut().zip(si) {
                *o += ui * s;
            }
        }
    }

    /// Exact Laplacian of the mixture log density:
    /// `Σ u_i Δlog p_i + Σ u_i ‖s_i‖² − ‖s̄‖²` with `s̄ = Σ u_i s_i`.
    pub(crate) fn laplacian_unchecked(&self, x: &[f64]) -> f64 {
        let r = self.resolve(x);
        let d = self.dim();
        let mut mean_score = vec![0.0; d];
        let mut acc = 0.0;
        for ((ui, si), c) in r.u.iter().zip(&r.scores).zip(&self.components) {
            acc += ui * (c.laplacian() + norm_sq(si));
            for (m, s) in mean_score.iter_mut().zip(si) {
                *m += ui * s;
            }
        }
        acc - norm_sq(&mean_score)
    }

    pub(crate) fn log_density(&self, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_density(x))
            .collect();
        log_sum_exp(&logs)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let t: f64 = rng.random();
        let mut cum = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            cum += w;
            if t < cum {
                pick = i;
                break;
            }
        }
        // Zero-weight tail components must never be picked by rounding.
        while self.weights[pick] == 0.0 && pick > 0 {
            pick -= 1;
        }
        self.components[pick].draw(rng)
    }
}
