use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_point, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-10;

/// Multivariate normal `N(mean, cov)` with cached precision and Cholesky factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    chol: DMatrix<f64>,
    trace_precision: f64,
    log_det: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for Gaussian {
    type Error = Error;

    fn try_from(r: GaussianRepr) -> Result<Self> {
        let cov = matrix_from_rows(&r.cov, "cov")?;
        Gaussian::new(r.mean, cov)
    }
}

impl From<Gaussian> for GaussianRepr {
    fn from(g: Gaussian) -> Self {
        GaussianRepr { mean: g.mean, cov: rows_of(&g.cov) }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidModel(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidModel("gaussian: empty mean".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::InvalidModel(format!(
                "gaussian: covariance is {}x{}, mean has length {d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("gaussian: non-finite parameter".into()));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidModel(format!("gaussian: covariance not symmetric ({asym:e})")));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("gaussian: covariance not positive definite".into()))?;
        let precision = chol.inverse();
        let residual = (&cov * &precision - DMatrix::identity(d, d)).amax();
        if residual >= INVERSE_TOL {
            return Err(Error::InvalidModel(format!(
                "gaussian: covariance too ill-conditioned (inverse residual {residual:e})"
            )));
        }
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            trace_precision: precision.trace(),
            mean,
            cov,
            precision,
            chol: l,
            log_det,
        })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn trace_precision(&self) -> f64 {
        self.trace_precision
    }

    /// `-V^{-1}(x - mean)` written into `out`.
    pub(crate) fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.precision[(i, j)] * (x[j] - self.mean[j]);
            }
            *o = -acc;
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, self.dim())?;
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, &mut out);
        Ok(out)
    }

    pub fn laplacian(&self) -> f64 {
        -self.trace_precision
    }

    /// `-(x-mean)ᵀ V^{-1} (x-mean) / 2`, the log density without its constant.
    pub(crate) fn log_unnormalized(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut q = 0.0;
        for i in 0..d {
            let di = x[i] - self.mean[i];
            for j in 0..d {
                q += di * self.precision[(i, j)] * (x[j] - self.mean[j]);
            }
        }
        -0.5 * q
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        self.log_unnormalized(x) - 0.5 * self.log_det - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let eta: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.chol[(i, j)] * eta[j]).sum::<f64>())
            .collect()
    }

    /// True when both covariances agree entrywise within `tol`.
    pub fn shares_covariance(&self, other: &Gaussian, tol: f64) -> bool {
        self.dim() == other.dim() && (&self.cov - &other.cov).amax() <= tol
    }

    /// `V^{-1} v` for the cached precision.
    pub fn precision_times(&self, v: &[f64]) -> Vec<f64> {
        let out = &self.precision * DVector::from_column_slice(v);
        out.iter().copied().collect()
    }
}
