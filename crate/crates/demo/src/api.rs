use nalgebra::DMatrix;
use rscusum::bench::{arl_edd_sweep_with, TrialSpec};
use rscusum::{Detector, Error, Gaussian, Result, RngStream, ScoreModel};

/// Shared covariance of every model on the page.
pub const COV: [[f64; 2]; 2] = [[2.0, 0.2], [0.2, 2.0]];

/// Largest grid side and path length the page may request.
pub const MAX_GRID: usize = 400;
pub const MAX_LENGTH: usize = 100_000;

fn gaussian(mean: &[f64]) -> Result<ScoreModel> {
    if mean.len() != 2 {
        return Err(Error::InvalidArgument(format!("mean must have 2 entries, got {}", mean.len())));
    }
    let cov = DMatrix::from_fn(2, 2, |i, j| COV[i][j]);
    Ok(Gaussian::new(mean.to_vec(), cov)?.into())
}

fn detector(q_inf: &[f64], q_post: &[f64], threshold: f64, rho: f64) -> Result<Detector> {
    Detector::from_models(gaussian(q_inf)?, gaussian(q_post)?, threshold, rho)
}

pub fn z_field(q_inf: &[f64], q_post: &[f64], rho: f64, extent: f64, n: usize) -> Result<Vec<f64>> {
    if !(2..=MAX_GRID).contains(&n) {
        return Err(Error::InvalidArgument(format!("grid side must be in 2..={MAX_GRID}")));
    }
    if !(extent.is_finite() && extent > 0.0) {
        return Err(Error::InvalidArgument("extent must be positive".into()));
    }
    let det = detector(q_inf, q_post, 0.0, rho)?;
    let mut rng = RngStream::new(0).rng();
    let step = 2.0 * extent / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let y = -extent + step * i as f64;
        for j in 0..n {
            let x = -extent + step * j as f64;
            out.push(det.instantaneous_score(&[x, y], &mut rng)?);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    q_inf: &[f64],
    q_post: &[f64],
    pre: &[f64],
    post: &[f64],
    change_point: u64,
    length: usize,
    rho: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if length > MAX_LENGTH {
        return Err(Error::InvalidArgument(format!("length must be at most {MAX_LENGTH}")));
    }
    let det = detector(q_inf, q_post, 0.0, rho)?;
    let (pre, post) = (gaussian(pre)?, gaussian(post)?);
    let (ScoreModel::Gaussian(pre), ScoreModel::Gaussian(post)) = (&pre, &post) else { unreachable!() };
    let mut rng = RngStream::new(seed).rng();
    let mut z = 0.0_f64;
    let mut path = Vec::with_capacity(length);
    for t in 1..=length as u64 {
        let x = if t < change_point { pre.draw(&mut rng) } else { post.draw(&mut rng) };
        z = (z + det.instantaneous_score(&x, &mut rng)?).max(0.0);
        path.push(z);
    }
    Ok(path)
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    q_inf: &[f64],
    q_post: &[f64],
    p_inf: &[f64],
    p_post: &[f64],
    rho: f64,
    omegas: &[f64],
    paths: usize,
    cap: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let det = detector(q_inf, q_post, 0.0, rho)?;
    let spec = TrialSpec::new(gaussian(p_inf)?, gaussian(p_post)?, det, paths, cap, RngStream::new(seed))?;
    let rows = arl_edd_sweep_with(&spec, omegas, paths, paths)?;
    Ok(rows.iter().flat_map(|r| [r.omega, r.arl.mean, r.arl.stderr, r.edd.mean, r.edd.stderr]).collect())
}
