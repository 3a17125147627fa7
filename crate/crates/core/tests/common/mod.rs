//! Fixtures shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rscusum::lfd::{gaussian_polytope_lfd, MeanPolytope};
use rscusum::{Detector, Gaussian, Gbrbm, LfdPair, ScoreModel};

pub fn v() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[2.0, 0.2, 0.2, 2.0])
}

pub fn diag(m: f64) -> ScoreModel {
    Gaussian::new(vec![m, m], v()).unwrap().into()
}

pub fn r_inf_a() -> ScoreModel {
    diag(-0.25)
}
pub fn r_inf_b() -> ScoreModel {
    diag(-1.5)
}
pub fn r_post_a() -> ScoreModel {
    diag(0.25)
}
pub fn r_post_b() -> ScoreModel {
    diag(0.75)
}

pub fn polytopes() -> (MeanPolytope, MeanPolytope) {
    (
        MeanPolytope::new(vec![vec![-0.25, -0.25], vec![-1.5, -1.5]], v()).unwrap(),
        MeanPolytope::new(vec![vec![0.25, 0.25], vec![0.75, 0.75]], v()).unwrap(),
    )
}

pub fn gaussian_lfd() -> LfdPair {
    let (a, b) = polytopes();
    gaussian_polytope_lfd(&a, &b).unwrap()
}

pub fn robust_detector(threshold: f64, rho: f64) -> Detector {
    let pair = gaussian_lfd();
    Detector::from_models(pair.q_inf, pair.q_post, threshold, rho).unwrap()
}

/// Nonrobust detector built from the non-least-favorable vertices.
pub fn nonrobust_detector(threshold: f64, rho: f64) -> Detector {
    Detector::from_models(r_inf_b(), r_post_b(), threshold, rho).unwrap()
}

/// The GBRBM family: one base `(W*, v*, h*)` of standard normal entries with
/// weight shifts −0.2, −0.05 (pre-change) and 0, +0.05 (post-change).
pub struct GbrbmFamily {
    pub inf: [ScoreModel; 2],
    pub post: [ScoreModel; 2],
}

pub fn gbrbm_family<R: Rng + ?Sized>(rng: &mut R) -> GbrbmFamily {
    let base = Gbrbm::standard_normal(10, 8, rng);
    let shift = |d: f64| -> ScoreModel { base.with_weight_shift(d).into() };
    GbrbmFamily { inf: [shift(-0.2), shift(-0.05)], post: [shift(0.0), shift(0.05)] }
}

pub fn normal_point<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Central-difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference divergence of a vector field.
pub fn fd_divergence(s: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> f64 {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = s(&y)[i];
            y[i] = x[i] - h;
            let down = s(&y)[i];
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .sum()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1.0);
    diff / scale
}
