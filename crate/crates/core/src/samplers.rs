//! Random generation for every model family.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Gaussian, GaussianMixture, Gbrbm, ScoreModel};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { burn_in: 1000, thin: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    /// Step size ε.
    pub step: f64,
    /// Unadjusted steps per refresh (K).
    pub steps: usize,
    /// Particle count (N).
    pub particles: usize,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self { step: 0.01, steps: 1000, particles: 10_000 }
    }
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!("langevin step must be positive, got {}", self.step)));
        }
        if self.particles == 0 {
            return Err(Error::InvalidArgument("langevin particle count must be at least 1".into()));
        }
        Ok(())
    }
}

/// A stream of draws from one model: i.i.d. for Gaussians and mixtures, a
/// thinned block-Gibbs chain for GBRBMs.
#[derive(Debug, Clone)]
pub enum Source<'a> {
    Gaussian(&'a Gaussian),
    Gmm(&'a GaussianMixture),
    Gibbs(GibbsChain<'a>),
}

impl<'a> Source<'a> {
    pub fn new(model: &'a ScoreModel) -> Result<Self> {
        Self::with_gibbs(model, GibbsConfig::default())
    }

    pub fn with_gibbs(model: &'a ScoreModel, cfg: GibbsConfig) -> Result<Self> {
        match model {
            ScoreModel::Gaussian(g) => Ok(Source::Gaussian(g)),
            ScoreModel::Gmm(m) => Ok(Source::Gmm(m)),
            ScoreModel::Gbrbm(g) => Ok(Source::Gibbs(GibbsChain::new(g, cfg)?)),
            other => Err(Error::NoSampler(other.type_name())),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        match self {
            Source::Gaussian(g) => g.draw(rng),
            Source::Gmm(m) => m.draw(rng),
            Source::Gibbs(chain) => chain.next(rng),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GibbsChain<'a> {
    model: &'a Gbrbm,
    cfg: GibbsConfig,
    state: Option<Vec<f64>>,
}

impl<'a> GibbsChain<'a> {
    pub fn new(model: &'a Gbrbm, cfg: GibbsConfig) -> Result<Self> {
        if cfg.thin == 0 {
            return Err(Error::InvalidArgument("gibbs thinning must be at least 1".into()));
        }
        Ok(Self { model, cfg, state: None })
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        let model = self.model;
        let burn_in = self.cfg.burn_in;
        let x = self.state.get_or_insert_with(|| {
            let mut x: Vec<f64> = model
                .visible_bias()
                .iter()
                .map(|b| b + rng.sample::<f64, _>(StandardNormal))
                .collect();
            for _ in 0..burn_in {
                model.gibbs_sweep(&mut x, rng);
            }
            x
        });
        for _ in 0..self.cfg.thin {
            model.gibbs_sweep(x, rng);
        }
        x.clone()
    }
}

/// `n` draws from a sampleable model.
pub fn sample<R: Rng + ?Sized>(model: &ScoreModel, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut src = Source::new(model)?;
    Ok((0..n).map(|_| src.draw(rng)).collect())
}

/// Block Gibbs sampling from a GBRBM: every `thin`-th visible state after `burn_in` sweeps.
pub fn gibbs_gbrbm<R: Rng + ?Sized>(
    model: &Gbrbm,
    n: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut chain = GibbsChain::new(model, GibbsConfig { burn_in, thin })?;
    Ok((0..n).map(|_| chain.next(rng)).collect())
}

/// Unadjusted Langevin: `x ← x + ε s(x) + √(2ε) t`, `t ~ N(0, I)`, applied
/// `cfg.steps` times to every particle.
///
/// Particle `i` uses its own stream derived from one seed drawn from `rng`,
/// so the result does not depend on the worker count.
pub fn langevin_chain<R: Rng + ?Sized>(
    score: &ScoreModel,
    particles: &mut [Vec<f64>],
    cfg: &LangevinConfig,
    rng: &mut R,
) -> Result<()> {
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::InvalidArgument(format!("langevin step must be positive, got {}", cfg.step)));
    }
    if particles.is_empty() {
        return Err(Error::InvalidArgument("no particles".into()));
    }
    let d = score.dim();
    if let Some(p) = particles.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.len() });
    }
    let seed: u64 = rng.random();
    let noise = (2.0 * cfg.step).sqrt();
    let diverged = particles
        .par_iter_mut()
        .enumerate()
        .map(|(i, x)| {
            let mut prng = RngStream::with_stream(seed, i as u64).rng();
            let mut s = vec![0.0; d];
            for _ in 0..cfg.steps {
                score.score_into(x, &mut s);
                for (xi, si) in x.iter_mut().zip(&s) {
                    *xi += cfg.step * si + noise * prng.sample::<f64, _>(StandardNormal);
                }
            }
            if x.iter().all(|v| v.is_finite()) {
                None
            } else {
                Some(i)
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .next();
    match diverged {
        Some(i) => Err(Error::LangevinDiverged(i)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Running;
    use nalgebra::DMatrix;

    #[test]
    fn gaussian_sample_moments() {
        let mut rng = RngStream::new(11).rng();
        let g: ScoreModel = Gaussian::new(vec![5.0, 5.0], DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 2.0]))
            .unwrap()
            .into();
        let xs = sample(&g, 100_000, &mut rng).unwrap();
        let n = xs.len() as f64;
        let m0 = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let m1 = xs.iter().map(|x| x[1]).sum::<f64>() / n;
        // 3σ/√n with σ = √2
        assert!((m0 - 5.0).abs() < 3.0 * 2f64.sqrt() / n.sqrt());
        assert!((m1 - 5.0).abs() < 3.0 * 2f64.sqrt() / n.sqrt());
        let c = |a: usize, b: usize, ma: f64, mb: f64| xs.iter().map(|x| (x[a] - ma) * (x[b] - mb)).sum::<f64>() / (n - 1.0);
        assert!((c(0, 0, m0, m0) - 2.0).abs() < 0.05);
        assert!((c(1, 1, m1, m1) - 2.0).abs() < 0.05);
        assert!((c(0, 1, m0, m1) - 0.2).abs() < 0.05);
    }

    #[test]
    fn degenerate_weights_pick_one_component() {
        let a = Gaussian::isotropic(vec![-100.0], 1.0).unwrap();
        let b = Gaussian::isotropic(vec![100.0], 1.0).unwrap();
        let m: ScoreModel = GaussianMixture::new(vec![a, b], vec![1.0, 0.0]).unwrap().into();
        let xs = sample(&m, 5000, &mut RngStream::new(2).rng()).unwrap();
        assert!(xs.iter().all(|x| x[0] < 0.0));
    }

    #[test]
    fn gibbs_with_zero_weights_is_gaussian_around_bias() {
        let b = vec![1.0, -2.0, 0.5];
        let g = Gbrbm::new(vec![0.0; 6], b.clone(), vec![0.0, 0.0]).unwrap();
        let n = 20_000;
        let xs = gibbs_gbrbm(&g, n, 10, 1, &mut RngStream::new(4).rng()).unwrap();
        for (i, bi) in b.iter().enumerate() {
            let m: Running = xs.iter().map(|x| x[i]).collect();
            assert!((m.mean() - bi).abs() < 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn gibbs_is_deterministic() {
        let g = Gbrbm::standard_normal(4, 3, &mut RngStream::new(0).rng());
        let a = gibbs_gbrbm(&g, 50, 20, 2, &mut RngStream::new(8).rng()).unwrap();
        let b = gibbs_gbrbm(&g, 50, 20, 2, &mut RngStream::new(8).rng()).unwrap();
        assert_eq!(a, b);
        assert!(gibbs_gbrbm(&g, 50, 20, 0, &mut RngStream::new(8).rng()).is_err());
    }

    #[test]
    fn gibbs_visible_conditional_mean() {
        let g = Gbrbm::standard_normal(3, 2, &mut RngStream::new(6).rng());
        let h = [1.0, 0.0];
        for i in 0..3 {
            let expect = g.visible_bias()[i] + g.weights()[i * 2];
            assert_eq!(g.visible_mean_given_hidden(i, &h), expect);
        }
    }

    #[test]
    fn langevin_zero_steps_is_identity() {
        let s: ScoreModel = Gaussian::isotropic(vec![0.0, 0.0], 1.0).unwrap().into();
        let mut ps = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let cfg = LangevinConfig { step: 0.01, steps: 0, particles: 2 };
        langevin_chain(&s, &mut ps, &cfg, &mut RngStream::new(0).rng()).unwrap();
        assert_eq!(ps, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn langevin_reaches_standard_normal() {
        let s: ScoreModel = Gaussian::isotropic(vec![0.0, 0.0], 1.0).unwrap().into();
        let mut ps = vec![vec![10.0, 10.0]; 10_000];
        let cfg = LangevinConfig { step: 0.01, steps: 5000, particles: 10_000 };
        langevin_chain(&s, &mut ps, &cfg, &mut RngStream::new(1).rng()).unwrap();
        assert_eq!(ps.len(), 10_000);
        for i in 0..2 {
            let m2 = ps.iter().map(|p| p[i] * p[i]).sum::<f64>() / ps.len() as f64;
            assert!((0.9..=1.1).contains(&m2), "second moment {m2}");
        }
    }

    #[test]
    fn langevin_divergence_names_particle() {
        // Score of N(0, 1e-4) with step 0.01 is wildly unstable.
        let s: ScoreModel = Gaussian::isotropic(vec![0.0], 1e-4).unwrap().into();
        let mut ps = vec![vec![0.0], vec![1.0]];
        let cfg = LangevinConfig { step: 0.01, steps: 2000, particles: 2 };
        let err = langevin_chain(&s, &mut ps, &cfg, &mut RngStream::new(1).rng()).unwrap_err();
        assert!(matches!(err, Error::LangevinDiverged(0)));
    }
}
