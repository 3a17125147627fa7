use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ScoreModel;
use crate::error::{check_point, Error, Result};
use crate::lfd::BetaNetwork;
use crate::stats::{norm_sq, Estimate, Running};

/// Probe count used when a score mixture needs a Hutchinson Laplacian.
pub const DEFAULT_PROBES: usize = 10;

const SIMPLEX_TOL: f64 = 1e-9;

/// Simplex-valued weights of a score mixture, either fixed or input-dependent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaWeights {
    Constant(Vec<f64>),
    Network(BetaNetwork),
}

/// Score field `x ↦ Σ β_i(x) ∇ₓ log p_i(x)` over a finite basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct ScoreMixture {
    basis: Vec<ScoreModel>,
    beta: BetaWeights,
    probes: usize,
}

#[derive(Serialize, Deserialize)]
struct MixtureRepr {
    basis: Vec<ScoreModel>,
    beta: BetaWeights,
    #[serde(default = "default_probes")]
    probes: usize,
}

fn default_probes() -> usize {
    DEFAULT_PROBES
}

impl TryFrom<MixtureRepr> for ScoreMixture {
    type Error = Error;

    fn try_from(r: MixtureRepr) -> Result<Self> {
        ScoreMixture::new(r.basis, r.beta)?.with_probes(r.probes)
    }
}

impl From<ScoreMixture> for MixtureRepr {
    fn from(m: ScoreMixture) -> Self {
        MixtureRepr { basis: m.basis, beta: m.beta, probes: m.probes }
    }
}

impl ScoreMixture {
    pub fn new(basis: Vec<ScoreModel>, beta: BetaWeights) -> Result<Self> {
        let Some(first) = basis.first() else {
            return Err(Error::InvalidModel("score mixture: empty basis".into()));
        };
        let d = first.dim();
        if basis.iter().any(|b| b.dim() != d) {
            return Err(Error::InvalidModel("score mixture: basis dimensions differ".into()));
        }
        let m = basis.len();
        match &beta {
            BetaWeights::Constant(w) => {
                if w.len() != m {
                    return Err(Error::InvalidModel(format!(
                        "score mixture: {} weights for {m} basis members",
                        w.len()
                    )));
                }
                let total: f64 = w.iter().sum();
                if w.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > SIMPLEX_TOL {
                    return Err(Error::InvalidModel("score mixture: weights not on the simplex".into()));
                }
            }
            BetaWeights::Network(net) => {
                if net.input_dim() != d || net.output_dim() != m {
                    return Err(Error::InvalidModel(format!(
                        "score mixture: network maps {} -> {}, need {d} -> {m}",
                        net.input_dim(),
                        net.output_dim()
                    )));
                }
            }
        }
        Ok(Self { basis, beta, probes: DEFAULT_PROBES })
    }

    pub fn with_probes(mut self, probes: usize) -> Result<Self> {
        if probes == 0 {
            return Err(Error::InvalidArgument("hutchinson probe count must be at least 1".into()));
        }
        self.probes = probes;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.basis[0].dim()
    }

    pub fn basis(&self) -> &[ScoreModel] {
        &self.basis
    }

    pub fn beta_weights(&self) -> &BetaWeights {
        &self.beta
    }

    pub fn probes(&self) -> usize {
        self.probes
    }

    pub fn beta(&self, x: &[f64]) -> Vec<f64> {
        match &self.beta {
            BetaWeights::Constant(w) => w.clone(),
            BetaWeights::Network(net) => net.forward(x),
        }
    }

    /// Exact for constant weights over members with exact Laplacians.
    pub fn has_exact_laplacian(&self) -> bool {
        matches!(self.beta, BetaWeights::Constant(_)) && self.basis.iter().all(ScoreModel::has_exact_laplacian)
    }

    pub(crate) fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let beta = self.beta(x);
        let mut tmp = vec![0.0; self.dim()];
        out.iter_mut().for_each(|o| *o = 0.0);
        for (b, model) in beta.iter().zip(&self.basis) {
            model.score_into(x, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += b * t;
            }
        }
    }

    pub(crate) fn laplacian_unchecked<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        if let (BetaWeights::Constant(w), true) = (&self.beta, self.has_exact_laplacian()) {
            // exact members ignore the generator
            return w.iter().zip(&self.basis).map(|(wi, b)| wi * b.laplacian_unchecked(x, rng)).sum();
        }
        probe_estimate(|y, out| self.score_into(y, out), x, self.probes, rng).mean
    }

    /// `Σ β_i log p̃_i(x)` for constant weights, when every basis member has one.
    pub(crate) fn log_unnormalized(&self, x: &[f64]) -> Option<f64> {
        let BetaWeights::Constant(w) = &self.beta else {
            return None;
        };
        w.iter()
            .zip(&self.basis)
            .map(|(wi, b)| b.log_unnormalized(x).map(|l| wi * l))
            .sum()
    }

    /// Hutchinson estimate of the divergence of this score field at `x`.
    pub fn hutchinson_laplacian<R: Rng + ?Sized>(&self, x: &[f64], n_probes: usize, rng: &mut R) -> Result<Estimate> {
        check_point(x, self.dim())?;
        if n_probes == 0 {
            return Err(Error::InvalidArgument("n_probes must be at least 1".into()));
        }
        Ok(probe_estimate(|y, out| self.score_into(y, out), x, n_probes, rng))
    }
}

/// Hutchinson trace estimator for the divergence of any score model.
///
/// Averages `εᵀ J ε` over `n_probes` standard normal probes, where `J ε` is
/// the directional derivative of the score along `ε`, taken by central
/// differences with step `1e-4 · max(1, ‖x‖)`.
pub fn hutchinson_laplacian<R: Rng + ?Sized>(
    model: &ScoreModel,
    x: &[f64],
    n_probes: usize,
    rng: &mut R,
) -> Result<Estimate> {
    check_point(x, model.dim())?;
    if n_probes == 0 {
        return Err(Error::InvalidArgument("n_probes must be at least 1".into()));
    }
    Ok(probe_estimate(|y, out| model.score_into(y, out), x, n_probes, rng))
}

fn probe_estimate<F, R>(score: F, x: &[f64], n_probes: usize, rng: &mut R) -> Estimate
where
    F: Fn(&[f64], &mut [f64]),
    R: Rng + ?Sized,
{
    let d = x.len();
    let h = 1e-4 * norm_sq(x).sqrt().max(1.0);
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut s_plus = vec![0.0; d];
    let mut s_minus = vec![0.0; d];
    let mut acc = Running::new();
    for _ in 0..n_probes {
        let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            plus[i] = x[i] + h * eps[i];
            minus[i] = x[i] - h * eps[i];
        }
        score(&plus, &mut s_plus);
        score(&minus, &mut s_minus);
        let quad: f64 = (0..d).map(|i| eps[i] * (s_plus[i] - s_minus[i])).sum::<f64>() / (2.0 * h);
        acc.push(quad);
    }
    acc.estimate()
}
