//! Learning least favorable score mixtures over finite model bases.
//!
//! Two [`BetaNetwork`]s weight the pre- and post-change bases. They are fit by
//! minibatch SGD on `mean_i ‖Σ_j β₁ʲ(xᵢ) ∇log g₁ʲ(xᵢ) − Σ_k β_∞ᵏ(xᵢ) ∇log g_∞ᵏ(xᵢ)‖²`
//! over a particle set. After every epoch the particles take `K` unadjusted
//! Langevin steps under the current post-change mixture score.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{BetaNetwork, LfdPair, Provenance, DEFAULT_HIDDEN};
use crate::error::{Error, Result};
use crate::models::{BetaWeights, ScoreMixture, ScoreModel};
use crate::rng::RngStream;
use crate::samplers::{langevin_chain, GibbsConfig, LangevinConfig, Source};
use crate::stats::{dist_sq, Estimate, Running};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Joint gradient norm cap over both networks.
    pub clip_norm: f64,
    pub hidden: usize,
    pub langevin: LangevinConfig,
    pub gibbs: GibbsConfig,
    /// Post-change basis member the particles start from.
    pub init_member: usize,
    pub held_out: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 256,
            clip_norm: 10.0,
            hidden: DEFAULT_HIDDEN,
            langevin: LangevinConfig::default(),
            gibbs: GibbsConfig::default(),
            init_member: 0,
            held_out: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        self.langevin.validate()?;
        let positive = self.epochs > 0
            && self.learning_rate > 0.0
            && self.batch_size > 0
            && self.clip_norm > 0.0
            && self.hidden > 0
            && self.held_out > 1;
        if !positive {
            return Err(Error::InvalidArgument("training config values must be positive (held_out >= 2)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaReport {
    /// Mean of `β_∞(x)` over the held-out particles.
    pub beta_inf: Vec<f64>,
    /// Mean of `β₁(x)` over the held-out particles.
    pub beta_post: Vec<f64>,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
    /// `D_F(Q₁‖Q_∞)` on the held-out particles.
    pub fisher_gap: Estimate,
    pub held_out: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub pair: LfdPair,
    pub report: BetaReport,
    pub network_inf: BetaNetwork,
    pub network_post: BetaNetwork,
}

/// Basis scores at one particle, flattened member-major.
struct CachedScores {
    inf: Vec<f64>,
    post: Vec<f64>,
}

fn cache_scores(basis: &[ScoreModel], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = vec![0.0; basis.len() * d];
    for (model, chunk) in basis.iter().zip(out.chunks_mut(d)) {
        model.score_into(x, chunk);
    }
    out
}

/// Loss at one particle; accumulates `scale · ∂loss/∂θ` into the two gradients.
fn accumulate(
    net_inf: &BetaNetwork,
    net_post: &BetaNetwork,
    x: &[f64],
    scores: &CachedScores,
    scale: f64,
    grad_inf: &mut [f64],
    grad_post: &mut [f64],
) -> f64 {
    let d = x.len();
    let act_inf = net_inf.forward_cached(x);
    let act_post = net_post.forward_cached(x);
    let mut r = vec![0.0; d];
    for (b, s) in act_post.beta.iter().zip(scores.post.chunks(d)) {
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += b * si;
        }
    }
    for (b, s) in act_inf.beta.iter().zip(scores.inf.chunks(d)) {
        for (ri, si) in r.iter_mut().zip(s) {
            *ri -= b * si;
        }
    }
    let loss: f64 = r.iter().map(|v| v * v).sum();
    let dot = |s: &[f64]| s.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
    let dbeta_post: Vec<f64> = scores.post.chunks(d).map(|s| 2.0 * scale * dot(s)).collect();
    let dbeta_inf: Vec<f64> = scores.inf.chunks(d).map(|s| -2.0 * scale * dot(s)).collect();
    net_post.backward(x, &act_post, &dbeta_post, grad_post);
    net_inf.backward(x, &act_inf, &dbeta_inf, grad_inf);
    loss
}

/// Mean loss over `xs` and its gradient, laid out as `[θ_∞, θ₁]`.
pub fn batch_loss_and_grad(
    net_inf: &BetaNetwork,
    net_post: &BetaNetwork,
    basis_inf: &[ScoreModel],
    basis_post: &[ScoreModel],
    xs: &[Vec<f64>],
) -> (f64, Vec<f64>) {
    let n_inf = net_inf.params().len();
    let mut grad = vec![0.0; n_inf + net_post.params().len()];
    let (gi, gp) = grad.split_at_mut(n_inf);
    let scale = 1.0 / xs.len() as f64;
    let mut loss = 0.0;
    for x in xs {
        let scores = CachedScores { inf: cache_scores(basis_inf, x), post: cache_scores(basis_post, x) };
        loss += accumulate(net_inf, net_post, x, &scores, scale, gi, gp);
    }
    (loss * scale, grad)
}

fn check_basis(basis: &[ScoreModel], d: usize, side: &str) -> Result<()> {
    if basis.is_empty() {
        return Err(Error::InvalidArgument(format!("{side} basis is empty")));
    }
    if let Some(m) = basis.iter().find(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
    }
    Ok(())
}

fn mixture(basis: &[ScoreModel], net: &BetaNetwork) -> Result<ScoreModel> {
    Ok(ScoreMixture::new(basis.to_vec(), BetaWeights::Network(net.clone()))?.into())
}

pub fn train_beta_networks(
    basis_inf: &[ScoreModel],
    basis_post: &[ScoreModel],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let d = basis_post.first().map(ScoreModel::dim).unwrap_or(0);
    check_basis(basis_inf, d, "pre-change")?;
    check_basis(basis_post, d, "post-change")?;
    let init = basis_post.get(cfg.init_member).ok_or_else(|| {
        Error::InvalidArgument(format!("init_member {} out of range", cfg.init_member))
    })?;

    let root = RngStream::new(cfg.seed);
    let mut init_rng = root.child(0).rng();
    let mut net_inf = BetaNetwork::random(d, cfg.hidden, basis_inf.len(), &mut init_rng);
    let mut net_post = BetaNetwork::random(d, cfg.hidden, basis_post.len(), &mut init_rng);

    let mut particles = {
        let mut src = Source::with_gibbs(init, cfg.gibbs)?;
        let mut rng = root.child(1).rng();
        (0..cfg.langevin.particles).map(|_| src.draw(&mut rng)).collect::<Vec<_>>()
    };

    let mut shuffle_rng = root.child(2).rng();
    let mut order: Vec<usize> = (0..particles.len()).collect();
    let n_inf = net_inf.params().len();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let cache: Vec<CachedScores> = particles
            .iter()
            .map(|x| CachedScores { inf: cache_scores(basis_inf, x), post: cache_scores(basis_post, x) })
            .collect();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = Running::new();
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; n_inf + net_post.params().len()];
            let (gi, gp) = grad.split_at_mut(n_inf);
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                loss += accumulate(&net_inf, &net_post, &particles[i], &cache[i], scale, gi, gp);
            }
            let loss = loss * scale;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged(epoch));
            }
            epoch_loss.push(loss);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let factor = cfg.learning_rate * if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
            for (p, g) in net_inf.params_mut().iter_mut().zip(&grad[..n_inf]) {
                *p -= factor * g;
            }
            for (p, g) in net_post.params_mut().iter_mut().zip(&grad[n_inf..]) {
                *p -= factor * g;
            }
        }
        loss_history.push(epoch_loss.mean());

        let post = mixture(basis_post, &net_post)?;
        let mut rng = root.child(3 + epoch as u64).rng();
        langevin_chain(&post, &mut particles, &cfg.langevin, &mut rng)?;
    }

    let q_inf = mixture(basis_inf, &net_inf)?;
    let q_post = mixture(basis_post, &net_post)?;
    let held_out = {
        let mut src = Source::with_gibbs(init, cfg.gibbs)?;
        let mut rng = root.child(u64::MAX).rng();
        let mut xs: Vec<Vec<f64>> = (0..cfg.held_out).map(|_| src.draw(&mut rng)).collect();
        langevin_chain(&q_post, &mut xs, &cfg.langevin, &mut rng)?;
        xs
    };

    let mut beta_inf = vec![0.0; basis_inf.len()];
    let mut beta_post = vec![0.0; basis_post.len()];
    let mut gap = Running::new();
    let (mut si, mut sp) = (vec![0.0; d], vec![0.0; d]);
    for x in &held_out {
        for (acc, b) in beta_inf.iter_mut().zip(net_inf.forward(x)) {
            *acc += b;
        }
        for (acc, b) in beta_post.iter_mut().zip(net_post.forward(x)) {
            *acc += b;
        }
        q_inf.score_into(x, &mut si);
        q_post.score_into(x, &mut sp);
        gap.push(0.5 * dist_sq(&sp, &si));
    }
    let n = held_out.len() as f64;
    beta_inf.iter_mut().for_each(|b| *b /= n);
    beta_post.iter_mut().for_each(|b| *b /= n);
    let fisher_gap = gap.estimate();

    Ok(TrainOutcome {
        pair: LfdPair::new(q_inf, q_post, fisher_gap.mean, Provenance::Learned)?,
        report: BetaReport { beta_inf, beta_post, loss_history, fisher_gap, held_out: held_out.len() },
        network_inf: net_inf,
        network_post: net_post,
    })
}
