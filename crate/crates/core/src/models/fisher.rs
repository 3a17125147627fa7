use rand::Rng;

use super::{Gaussian, ScoreModel};
use crate::error::{Error, Result};
use crate::samplers::Source;
use crate::stats::{dist_sq, norm_sq, Estimate, Running};

const SHARED_COV_TOL: f64 = 1e-10;

/// Closed-form Fisher divergence `½‖V⁻¹(μ_p − μ_q)‖²` for a shared covariance.
pub fn fisher_gaussian(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    if !p.shares_covariance(q, SHARED_COV_TOL) {
        return Err(Error::CovarianceMismatch);
    }
    let delta: Vec<f64> = p.mean().iter().zip(q.mean()).map(|(a, b)| a - b).collect();
    Ok(0.5 * norm_sq(&p.precision_times(&delta)))
}

/// Monte Carlo `E_{X~p}[½‖∇log p(X) − ∇log q(X)‖²]` over `n` draws from `p`.
pub fn fisher_mc<R: Rng + ?Sized>(p: &ScoreModel, q: &ScoreModel, n: usize, rng: &mut R) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("fisher_mc needs at least 2 draws".into()));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let mut source = Source::new(p)?;
    let samples: Vec<Vec<f64>> = (0..n).map(|_| source.draw(rng)).collect();
    Ok(fisher_on_samples(p, q, &samples))
}

/// The Fisher divergence estimate on caller-supplied draws from `p`.
pub fn fisher_on_samples(p: &ScoreModel, q: &ScoreModel, samples: &[Vec<f64>]) -> Estimate {
    let d = p.dim();
    let mut sp = vec![0.0; d];
    let mut sq = vec![0.0; d];
    samples
        .iter()
        .map(|x| {
            p.score_into(x, &mut sp);
            q.score_into(x, &mut sq);
            0.5 * dist_sq(&sp, &sq)
        })
        .collect::<Running>()
        .estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use nalgebra::DMatrix;

    fn g(mean: [f64; 2]) -> Gaussian {
        Gaussian::new(mean.to_vec(), DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 2.0])).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        // V⁻¹(0.5,0.5) = (0.5/2.2)(1,1); half its squared norm.
        let d = fisher_gaussian(&g([0.25, 0.25]), &g([-0.25, -0.25])).unwrap();
        assert!((d - (0.5f64 / 2.2).powi(2)).abs() < 1e-15);
        assert!((d - 0.0516529).abs() < 1e-7);
        let d = fisher_gaussian(&g([0.75, 0.75]), &g([-0.25, -0.25])).unwrap();
        assert!((d - 0.206612).abs() < 1e-6);
        assert_eq!(fisher_gaussian(&g([1.0, 2.0]), &g([1.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_for_shared_covariance() {
        let a = g([0.1, -0.4]);
        let b = g([1.3, 0.2]);
        assert_eq!(fisher_gaussian(&a, &b).unwrap(), fisher_gaussian(&b, &a).unwrap());
    }

    #[test]
    fn differing_covariance_is_an_error() {
        let a = Gaussian::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(fisher_gaussian(&a, &g([0.0, 0.0])), Err(Error::CovarianceMismatch)));
    }

    #[test]
    fn self_divergence_is_exactly_zero() {
        let p: ScoreModel = g([0.3, 0.3]).into();
        let e = fisher_mc(&p, &p, 100, &mut RngStream::new(9).rng()).unwrap();
        assert_eq!(e, Estimate::exact(0.0));
    }

    #[test]
    fn mixtures_cannot_be_sampled() {
        use crate::models::{BetaWeights, ScoreMixture};
        let m: ScoreModel = ScoreMixture::new(vec![g([0.0, 0.0]).into()], BetaWeights::Constant(vec![1.0]))
            .unwrap()
            .into();
        let p: ScoreModel = g([0.0, 0.0]).into();
        let err = fisher_mc(&m, &p, 10, &mut RngStream::new(0).rng()).unwrap_err();
        assert!(matches!(err, Error::NoSampler("score_mixture")));
    }
}
