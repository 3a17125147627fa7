//! Least favorable distribution search.
//!
//! Two routes produce an [`LfdPair`]: the closed-form V-norm nearest points
//! for Gaussian mean polytopes, and a learned pair of softmax-weighted score
//! mixtures for finite bases of arbitrary models.

mod beta;
mod polytope;
mod train;

pub use beta::{param_count, softmax, Activations, BetaNetwork, DEFAULT_HIDDEN};
pub use polytope::{gaussian_polytope_lfd, solve_polytope_lfd, MeanPolytope, PolytopeLfd};
pub use train::{batch_loss_and_grad, train_beta_networks, BetaReport, TrainConfig, TrainOutcome};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ScoreModel;
use crate::samplers::Source;
use crate::stats::{dist_sq, Estimate, Running};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Learned,
}

/// Pre-change and post-change models minimizing `D_F(q_post ‖ q_inf)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LfdPair {
    pub q_inf: ScoreModel,
    pub q_post: ScoreModel,
    pub fisher_gap: f64,
    pub provenance: Provenance,
}

impl LfdPair {
    pub fn new(q_inf: ScoreModel, q_post: ScoreModel, fisher_gap: f64, provenance: Provenance) -> Result<Self> {
        if q_inf.dim() != q_post.dim() {
            return Err(Error::DimensionMismatch { expected: q_inf.dim(), got: q_post.dim() });
        }
        if !(fisher_gap > 0.0 && fisher_gap.is_finite()) {
            return Err(Error::InvalidModel(format!("lfd pair: fisher gap must be positive, got {fisher_gap}")));
        }
        Ok(Self { q_inf, q_post, fisher_gap, provenance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    /// `Pass` when `gap < −k·se`, `Fail` when `gap ≥ k·se`.
    pub fn from_gap(gap: Estimate, k: f64) -> Self {
        if gap.mean < -k * gap.stderr {
            Verdict::Pass
        } else if gap.mean >= k * gap.stderr {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexCheck {
    pub index: usize,
    pub to_inf: Estimate,
    pub to_post: Estimate,
    /// `D_F(P‖Q_∞) − D_F(P‖Q_1)` with its paired standard error.
    pub gap: Estimate,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftReport {
    pub vertices: Vec<VertexCheck>,
    pub verdict: Verdict,
}

/// Checks `D_F(P_i‖Q_∞) < D_F(P_i‖Q_1)` for every pre-change basis vertex.
///
/// Both divergences use the same `n` draws from `P_i`, so the gap's standard
/// error comes from the paired per-sample differences.
pub fn verify_drift_condition<R: Rng + ?Sized>(
    basis_inf: &[ScoreModel],
    pair: &LfdPair,
    n: usize,
    rng: &mut R,
) -> Result<DriftReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 draws per vertex".into()));
    }
    let d = pair.q_inf.dim();
    let mut vertices = Vec::with_capacity(basis_inf.len());
    for (index, p) in basis_inf.iter().enumerate() {
        if p.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
        }
        let mut src = Source::new(p)?;
        let (mut sp, mut si, mut s1) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let (mut to_inf, mut to_post, mut gap) = (Running::new(), Running::new(), Running::new());
        for _ in 0..n {
            let x = src.draw(rng);
            p.score_into(&x, &mut sp);
            pair.q_inf.score_into(&x, &mut si);
            pair.q_post.score_into(&x, &mut s1);
            let a = 0.5 * dist_sq(&sp, &si);
            let b = 0.5 * dist_sq(&sp, &s1);
            to_inf.push(a);
            to_post.push(b);
            gap.push(a - b);
        }
        let gap = gap.estimate();
        vertices.push(VertexCheck {
            index,
            to_inf: to_inf.estimate(),
            to_post: to_post.estimate(),
            gap,
            verdict: Verdict::from_gap(gap, 3.0),
        });
    }
    let verdict = if vertices.iter().all(|v| v.verdict == Verdict::Pass) {
        Verdict::Pass
    } else if vertices.iter().any(|v| v.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(DriftReport { vertices, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Gaussian;
    use crate::rng::RngStream;
    use nalgebra::DMatrix;

    fn g(m: f64) -> ScoreModel {
        Gaussian::new(vec![m, m], DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 2.0]))
            .unwrap()
            .into()
    }

    #[test]
    fn gaussian_family_passes() {
        let pair = LfdPair::new(g(-0.25), g(0.25), 0.0516529, Provenance::Analytic).unwrap();
        let report = verify_drift_condition(&[g(-0.25), g(-1.5)], &pair, 20_000, &mut RngStream::new(3).rng()).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        // closed forms: −0.0516529 and (1.25² − 1.75²)/2.2²
        let expect = [-(0.5f64 / 2.2).powi(2), (1.25f64.powi(2) - 1.75f64.powi(2)) / 2.2f64.powi(2)];
        for (v, e) in report.vertices.iter().zip(expect) {
            assert!(v.gap.agrees_with(e, 4.0) || (v.gap.mean - e).abs() < 1e-12, "{v:?} vs {e}");
        }
    }

    #[test]
    fn identical_pair_fails() {
        let pair = LfdPair { q_inf: g(0.0), q_post: g(0.0), fisher_gap: 1.0, provenance: Provenance::Analytic };
        let report = verify_drift_condition(&[g(-1.0)], &pair, 100, &mut RngStream::new(0).rng()).unwrap();
        assert_eq!(report.vertices[0].gap, Estimate::exact(0.0));
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn pair_rejects_nonpositive_gap() {
        assert!(LfdPair::new(g(0.0), g(0.0), 0.0, Provenance::Analytic).is_err());
    }
}
