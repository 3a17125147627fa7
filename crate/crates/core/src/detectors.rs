//! Reflected cumulative-sum detectors.
//!
//! [`Detector`] runs the score-based recursion `Z(n) = max(Z(n−1) + z(Xₙ), 0)`
//! with `z(x) = ρ·(S_H(x, pre) − S_H(x, post))`. Fed the least favorable pair
//! it is the robust detector; fed any other pair from the uncertainty classes
//! it is the nonrobust variant. [`LikelihoodCusum`] is the classical
//! log-likelihood-ratio baseline for Gaussian pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_point, Error, Result};
use crate::models::{Gaussian, ScoreModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub model_inf: ScoreModel,
    pub model_post: ScoreModel,
    pub threshold: f64,
    #[serde(default = "one")]
    pub rho: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub statistic: f64,
    pub n: u64,
    pub stopped_at: Option<u64>,
}

impl DetectorState {
    pub fn new() -> Self {
        Self::default()
    }

    /// One reflected update with a precomputed increment.
    pub fn advance(&mut self, increment: f64, threshold: f64) {
        self.statistic = (self.statistic + increment).max(0.0);
        self.n += 1;
        if self.stopped_at.is_none() && self.statistic >= threshold {
            self.stopped_at = Some(self.n);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopOutcome {
    Stopped(u64),
    Censored(u64),
}

impl StopOutcome {
    /// Stopping time, with censored runs counted at their cap.
    pub fn time(&self) -> u64 {
        match *self {
            StopOutcome::Stopped(t) | StopOutcome::Censored(t) => t,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, StopOutcome::Censored(_))
    }
}

/// A configured score-based CUSUM.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DetectorConfig", into = "DetectorConfig")]
pub struct Detector {
    cfg: DetectorConfig,
}

impl TryFrom<DetectorConfig> for Detector {
    type Error = Error;

    fn try_from(cfg: DetectorConfig) -> Result<Self> {
        Detector::new(cfg)
    }
}

impl From<Detector> for DetectorConfig {
    fn from(d: Detector) -> Self {
        d.cfg
    }
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        if !(cfg.threshold >= 0.0 && cfg.threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!("threshold must be finite and >= 0, got {}", cfg.threshold)));
        }
        if !(cfg.rho > 0.0 && cfg.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", cfg.rho)));
        }
        if cfg.model_inf.dim() != cfg.model_post.dim() {
            return Err(Error::DimensionMismatch { expected: cfg.model_inf.dim(), got: cfg.model_post.dim() });
        }
        Ok(Self { cfg })
    }

    pub fn from_models(model_inf: ScoreModel, model_post: ScoreModel, threshold: f64, rho: f64) -> Result<Self> {
        Self::new(DetectorConfig { model_inf, model_post, threshold, rho })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.model_inf.dim()
    }

    pub fn threshold(&self) -> f64 {
        self.cfg.threshold
    }

    pub fn rho(&self) -> f64 {
        self.cfg.rho
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(DetectorConfig { threshold, ..self.cfg.clone() })
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(DetectorConfig { rho, ..self.cfg.clone() })
    }

    /// True when the increment needs no random probes.
    pub fn is_deterministic(&self) -> bool {
        self.cfg.model_inf.has_exact_laplacian() && self.cfg.model_post.has_exact_laplacian()
    }

    /// Unscaled `S_H(x, pre) − S_H(x, post)`.
    pub(crate) fn raw_score_unchecked<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        self.cfg.model_inf.hyvarinen_unchecked(x, rng) - self.cfg.model_post.hyvarinen_unchecked(x, rng)
    }

    /// `ρ·(S_H(x, pre) − S_H(x, post))`.
    pub fn instantaneous_score<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        check_point(x, self.dim())?;
        Ok(self.cfg.rho * self.raw_score_unchecked(x, rng))
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &mut DetectorState, x: &[f64], rng: &mut R) -> Result<()> {
        let z = self.instantaneous_score(x, rng)?;
        state.advance(z, self.cfg.threshold);
        Ok(())
    }

    /// First `n` with `Z(n) ≥ ω`, or censored when the stream or the cap runs out.
    pub fn run_stream<I, R>(&self, xs: I, cap: u64, rng: &mut R) -> Result<(StopOutcome, DetectorState)>
    where
        I: IntoIterator,
        I::Item: AsRef<[f64]>,
        R: Rng + ?Sized,
    {
        if cap == 0 {
            return Err(Error::InvalidArgument("cap must be at least 1".into()));
        }
        let mut state = DetectorState::new();
        for x in xs {
            if state.n >= cap {
                break;
            }
            self.step(&mut state, x.as_ref(), rng)?;
            if let Some(t) = state.stopped_at {
                return Ok((StopOutcome::Stopped(t), state));
            }
        }
        Ok((StopOutcome::Censored(state.n), state))
    }
}

/// Classical CUSUM on `log p_post(x) − log p_inf(x)` for two Gaussians.
#[derive(Debug, Clone)]
pub struct LikelihoodCusum {
    p_inf: Gaussian,
    p_post: Gaussian,
    threshold: f64,
}

impl LikelihoodCusum {
    pub fn new(p_inf: &ScoreModel, p_post: &ScoreModel, threshold: f64) -> Result<Self> {
        let (Some(a), Some(b)) = (p_inf.as_gaussian(), p_post.as_gaussian()) else {
            return Err(Error::InvalidModel(format!(
                "likelihood CUSUM needs two gaussians, got {} and {}",
                p_inf.type_name(),
                p_post.type_name()
            )));
        };
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
        }
        Ok(Self { p_inf: a.clone(), p_post: b.clone(), threshold })
    }

    pub fn increment(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.p_inf.dim())?;
        Ok(self.p_post.log_density(x) - self.p_inf.log_density(x))
    }

    pub fn step(&self, state: &mut DetectorState, x: &[f64]) -> Result<()> {
        let inc = self.increment(x)?;
        state.advance(inc, self.threshold);
        Ok(())
    }
}

/// One classical CUSUM update; errors unless both models are Gaussian.
pub fn cusum_log_lr_step(
    p_inf: &ScoreModel,
    p_post: &ScoreModel,
    threshold: f64,
    state: &mut DetectorState,
    x: &[f64],
) -> Result<()> {
    LikelihoodCusum::new(p_inf, p_post, threshold)?.step(state, x)
}
