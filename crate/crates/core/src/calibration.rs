//! False-alarm calibration.
//!
//! The multiplier ρ* is the largest ρ with `h(ρ) = E_∞[exp(ρ z(X))] − 1 ≤ 0`.
//! Once found, a threshold `ω = ln γ / ρ*` guarantees an average run length
//! of at least γ. `h` is strictly convex with `h(0) = 0` and `h'(0) = E_∞[z] < 0`,
//! so it has at most one positive root.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::Detector;
use crate::error::{Error, Result};
use crate::lfd::LfdPair;
use crate::models::{Gaussian, ScoreModel};
use crate::samplers::Source;
use crate::stats::{Estimate, Running};

pub const RHO_CAP: f64 = 65_536.0;
const GUARD: f64 = 3.0;
const MAX_LOG_MEAN: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub rho: f64,
    pub h: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoSolution {
    pub rho_star: f64,
    pub h_curve: Vec<HPoint>,
    pub method: RhoMethod,
    /// `h < 0` on the whole search range; `rho_star` is the cap.
    pub degenerate: bool,
    pub samples: usize,
    /// Mean of the unscaled increment under the pre-change law.
    pub drift: Estimate,
}

/// Unscaled increments `z(Xᵢ)` drawn once and reused for every ρ.
#[derive(Debug, Clone)]
pub struct IncrementSample {
    z: Vec<f64>,
}

impl IncrementSample {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::InvalidArgument("need at least 2 increments".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite increment".into()));
        }
        Ok(Self { z })
    }

    /// Draws `n` pre-change observations and evaluates the pair's increment.
    pub fn draw<R: Rng + ?Sized>(p_inf: &ScoreModel, pair: &LfdPair, n: usize, rng: &mut R) -> Result<Self> {
        let det = Detector::from_models(pair.q_inf.clone(), pair.q_post.clone(), 0.0, 1.0)?;
        if p_inf.dim() != det.dim() {
            return Err(Error::DimensionMismatch { expected: det.dim(), got: p_inf.dim() });
        }
        let mut src = Source::new(p_inf)?;
        let z = (0..n)
            .map(|_| {
                let x = src.draw(rng);
                det.raw_score_unchecked(&x, rng)
            })
            .collect();
        Self::new(z)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn drift(&self) -> Estimate {
        self.z.iter().copied().collect::<Running>().estimate()
    }

    /// `ĥ(ρ)` and its standard error, reduced in log space.
    pub fn h(&self, rho: f64) -> Result<Estimate> {
        if !(rho >= 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be >= 0, got {rho}")));
        }
        let n = self.z.len() as f64;
        let max = self.z.iter().map(|z| rho * z).fold(f64::NEG_INFINITY, f64::max);
        let (mut s1, mut s2) = (0.0, 0.0);
        for z in &self.z {
            let e = (rho * z - max).exp();
            s1 += e;
            s2 += e * e;
        }
        let log_mean = max + (s1 / n).ln();
        if log_mean > MAX_LOG_MEAN {
            return Err(Error::MgfOverflow(max));
        }
        let m1 = s1 / n;
        let var = ((s2 / n - m1 * m1).max(0.0)) * n / (n - 1.0);
        let stderr = if var > 0.0 { (max + 0.5 * (var / n).ln()).exp() } else { 0.0 };
        Ok(Estimate { mean: log_mean.exp_m1(), stderr })
    }

    pub fn h_point(&self, rho: f64) -> Result<HPoint> {
        let e = self.h(rho)?;
        Ok(HPoint { rho, h: e.mean, stderr: e.stderr })
    }
}

/// Monte Carlo `h(ρ) = E_∞[exp(ρ z(X))] − 1` under `p_inf`.
pub fn mgf_gap<R: Rng + ?Sized>(
    p_inf: &ScoreModel,
    pair: &LfdPair,
    rho: f64,
    n: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 draws".into()));
    }
    IncrementSample::draw(p_inf, pair, n, rng)?.h(rho)
}

pub fn solve_rho_star<R: Rng + ?Sized>(
    p_inf: &ScoreModel,
    pair: &LfdPair,
    n: usize,
    rng: &mut R,
    tol: f64,
) -> Result<RhoSolution> {
    solve_rho_star_from(&IncrementSample::draw(p_inf, pair, n, rng)?, tol)
}

/// Bracket-and-bisect on `ĥ` over a fixed increment sample.
///
/// Expands ρ geometrically from 1 until `ĥ(ρ) > 3·se`; if the cap is reached
/// first, returns a degenerate solution at the cap.
pub fn solve_rho_star_from(sample: &IncrementSample, tol: f64) -> Result<RhoSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let drift = sample.drift();
    if drift.mean >= 0.0 {
        return Err(Error::PositiveDrift { drift: drift.mean });
    }
    let mut curve = vec![sample.h_point(0.0)?];
    let mut hi = 1.0;
    let degenerate = loop {
        let p = sample.h_point(hi)?;
        curve.push(p);
        if p.h > GUARD * p.stderr {
            break false;
        }
        if hi >= RHO_CAP {
            break true;
        }
        hi *= 2.0;
    };
    let solution = |rho_star: f64, mut curve: Vec<HPoint>, degenerate: bool| {
        curve.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        RhoSolution { rho_star, h_curve: curve, method: RhoMethod::MonteCarlo, degenerate, samples: sample.len(), drift }
    };
    if degenerate {
        return Ok(solution(hi, curve, true));
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let p = sample.h_point(mid)?;
        curve.push(p);
        if p.h > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(solution(0.5 * (lo + hi), curve, false))
}

/// Increment coefficients `(a, c)` with `z(x) = aᵀx + c`, available when both
/// pair members are Gaussians with one shared covariance.
pub fn linear_increment(pair: &LfdPair) -> Option<(Vec<f64>, f64)> {
    let (q_inf, q_post) = (pair.q_inf.as_gaussian()?, pair.q_post.as_gaussian()?);
    if !q_inf.shares_covariance(q_post, 1e-10) {
        return None;
    }
    // ½‖P(x−μ∞)‖² − ½‖P(x−μ₁)‖² = (μ₁−μ∞)ᵀP²x + ½(‖Pμ∞‖² − ‖Pμ₁‖²)
    let delta: Vec<f64> = q_post.mean().iter().zip(q_inf.mean()).map(|(a, b)| a - b).collect();
    let a = q_inf.precision_times(&q_inf.precision_times(&delta));
    let pm_inf = q_inf.precision_times(q_inf.mean());
    let pm_post = q_inf.precision_times(q_post.mean());
    let c = 0.5 * (pm_inf.iter().map(|v| v * v).sum::<f64>() - pm_post.iter().map(|v| v * v).sum::<f64>());
    Some((a, c))
}

/// Closed-form ρ* for a Gaussian pre-change law and a shared-covariance
/// Gaussian pair: `z(X)` is normal with mean `m` and variance `s²`, so
/// `h(ρ) = exp(ρm + ρ²s²/2) − 1` and `ρ* = −2m/s²`.
pub fn gaussian_rho_star(p_inf: &Gaussian, pair: &LfdPair) -> Option<RhoSolution> {
    let (a, c) = linear_increment(pair)?;
    if a.len() != p_inf.dim() {
        return None;
    }
    let m = a.iter().zip(p_inf.mean()).map(|(x, y)| x * y).sum::<f64>() + c;
    let cov = p_inf.cov();
    let s2: f64 = (0..a.len()).flat_map(|i| (0..a.len()).map(move |j| (i, j))).map(|(i, j)| a[i] * cov[(i, j)] * a[j]).sum();
    if !(m < 0.0) || !(s2 > 0.0) {
        return None;
    }
    let rho_star = -2.0 * m / s2;
    let h = |rho: f64| (rho * m + 0.5 * rho * rho * s2).exp_m1();
    let h_curve = (0..=8)
        .map(|k| {
            let rho = rho_star * k as f64 / 4.0;
            HPoint { rho, h: h(rho), stderr: 0.0 }
        })
        .collect();
    Some(RhoSolution {
        rho_star,
        h_curve,
        method: RhoMethod::ClosedForm,
        degenerate: false,
        samples: 0,
        drift: Estimate::exact(m),
    })
}

/// `ω = ln γ / ρ`. The bound `ARL ≥ γ` holds when ω thresholds the unscaled statistic,
/// i.e. a detector with multiplier 1 (equivalently multiplier ρ with threshold `ln γ`).
pub fn threshold_for_arl(gamma: f64, rho: f64) -> Result<f64> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("ARL target must be >= 1, got {gamma}")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    Ok(gamma.ln() / rho)
}

/// Second divided differences of `ĥ` on an evenly spaced grid, each paired
/// with its propagated standard error (independent-error bound).
pub fn second_differences(points: &[HPoint]) -> Vec<(f64, f64)> {
    points
        .windows(3)
        .map(|w| {
            let step = w[1].rho - w[0].rho;
            let dd = (w[2].h - 2.0 * w[1].h + w[0].h) / (step * step);
            let se = (w[2].stderr.powi(2) + 4.0 * w[1].stderr.powi(2) + w[0].stderr.powi(2)).sqrt() / (step * step);
            (dd, se)
        })
        .collect()
}
