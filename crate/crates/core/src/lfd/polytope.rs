//! Nearest points of two Gaussian mean polytopes under the V-norm
//! `‖θ‖_V = √(θᵀV⁻²θ)`.
//!
//! The problem is a convex QP over barycentric coordinates
//! `min ‖Aα − Bβ‖²_{V⁻²}`, `α ∈ Δ_m`, `β ∈ Δ_k`, solved by alternating exact
//! minimization. Each half-step minimizes a convex quadratic over one simplex:
//! by enumerating every support set when `m ≤ 8`, by projected gradient above.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LfdPair, Provenance};
use crate::error::{Error, Result};
use crate::models::{fisher_gaussian, matrix_from_rows, rows_of, Gaussian};

const ENUMERATION_LIMIT: usize = 8;
const CONVERGENCE_TOL: f64 = 1e-12;
const DISJOINT_TOL: f64 = 1e-10;
const UNIQUENESS_TOL: f64 = 1e-6;
const MAX_SWEEPS: usize = 10_000;

/// Convex hull of mean vectors sharing one covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRepr", into = "PolytopeRepr")]
pub struct MeanPolytope {
    vertices: Vec<Vec<f64>>,
    cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeRepr {
    vertices: Vec<Vec<f64>>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<PolytopeRepr> for MeanPolytope {
    type Error = Error;

    fn try_from(r: PolytopeRepr) -> Result<Self> {
        MeanPolytope::new(r.vertices, matrix_from_rows(&r.cov, "cov")?)
    }
}

impl From<MeanPolytope> for PolytopeRepr {
    fn from(p: MeanPolytope) -> Self {
        PolytopeRepr { vertices: p.vertices, cov: rows_of(&p.cov) }
    }
}

impl MeanPolytope {
    pub fn new(vertices: Vec<Vec<f64>>, cov: DMatrix<f64>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidModel("polytope: no vertices".into()));
        }
        let d = cov.nrows();
        if let Some(v) = vertices.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
        // validates symmetry and positive definiteness
        Gaussian::new(vertices[0].clone(), cov.clone())?;
        Ok(Self { vertices, cov })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// The Gaussian at each vertex.
    pub fn vertex_models(&self) -> Vec<Gaussian> {
        self.vertices
            .iter()
            .map(|v| Gaussian::new(v.clone(), self.cov.clone()).expect("validated at construction"))
            .collect()
    }

    fn point(&self, weights: &[f64]) -> DVector<f64> {
        let mut p = DVector::zeros(self.dim());
        for (w, v) in weights.iter().zip(&self.vertices) {
            p += DVector::from_column_slice(v) * *w;
        }
        p
    }
}

/// Full output of the polytope search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolytopeLfd {
    pub pair: LfdPair,
    pub mean_inf: Vec<f64>,
    pub mean_post: Vec<f64>,
    pub weights_inf: Vec<f64>,
    pub weights_post: Vec<f64>,
    /// V-norm distance between the two means.
    pub distance: f64,
    /// False when perturbed restarts reached different minimizers.
    pub unique: bool,
}

/// Least favorable Gaussian pair for two disjoint mean polytopes.
pub fn gaussian_polytope_lfd(m_inf: &MeanPolytope, m_post: &MeanPolytope) -> Result<LfdPair> {
    solve_polytope_lfd(m_inf, m_post).map(|s| s.pair)
}

pub fn solve_polytope_lfd(m_inf: &MeanPolytope, m_post: &MeanPolytope) -> Result<PolytopeLfd> {
    if m_inf.dim() != m_post.dim() {
        return Err(Error::DimensionMismatch { expected: m_inf.dim(), got: m_post.dim() });
    }
    if (m_inf.cov() - m_post.cov()).amax() > 1e-10 {
        return Err(Error::CovarianceMismatch);
    }
    let metric = {
        let p = Gaussian::new(m_inf.vertices[0].clone(), m_inf.cov.clone())?.precision().clone();
        &p * &p
    };
    let a = columns(m_inf);
    let b = columns(m_post);
    let (m, k) = (a.ncols(), b.ncols());

    let mut starts = vec![(vec![1.0 / m as f64; m], vec![1.0 / k as f64; k])];
    for i in 0..m.min(4) {
        for j in 0..k.min(4) {
            starts.push((unit(m, i), unit(k, j)));
        }
    }

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut unique = true;
    for (alpha0, beta0) in starts {
        let (dist_sq, alpha, beta) = alternate(&a, &b, &metric, alpha0, beta0);
        match &best {
            None => best = Some((dist_sq, alpha, beta)),
            Some((bd, ba, bb)) => {
                let moved = (&a * DVector::from_column_slice(&alpha) - &a * DVector::from_column_slice(ba)).amax()
                    + (&b * DVector::from_column_slice(&beta) - &b * DVector::from_column_slice(bb)).amax();
                if moved > UNIQUENESS_TOL {
                    unique = false;
                }
                if dist_sq < *bd {
                    best = Some((dist_sq, alpha, beta));
                }
            }
        }
    }
    let (dist_sq, alpha, beta) = best.expect("at least one start");
    let distance = dist_sq.max(0.0).sqrt();
    if distance <= DISJOINT_TOL {
        return Err(Error::NotDisjoint(distance));
    }

    let mean_inf: Vec<f64> = m_inf.point(&alpha).iter().copied().collect();
    let mean_post: Vec<f64> = m_post.point(&beta).iter().copied().collect();
    let q_inf = Gaussian::new(mean_inf.clone(), m_inf.cov.clone())?;
    let q_post = Gaussian::new(mean_post.clone(), m_post.cov.clone())?;
    let fisher_gap = fisher_gaussian(&q_post, &q_inf)?;
    Ok(PolytopeLfd {
        pair: LfdPair::new(q_inf.into(), q_post.into(), fisher_gap, Provenance::Analytic)?,
        mean_inf,
        mean_post,
        weights_inf: alpha,
        weights_post: beta,
        distance,
        unique,
    })
}

fn columns(p: &MeanPolytope) -> DMatrix<f64> {
    DMatrix::from_fn(p.dim(), p.vertices.len(), |i, j| p.vertices[j][i])
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Returns the squared V-norm distance and the two weight vectors.
fn alternate(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    metric: &DMatrix<f64>,
    mut alpha: Vec<f64>,
    mut beta: Vec<f64>,
) -> (f64, Vec<f64>, Vec<f64>) {
    let gram_a = a.transpose() * metric * a;
    let gram_b = b.transpose() * metric * b;
    let mut prev = f64::INFINITY;
    let mut current = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let target = b * DVector::from_column_slice(&beta);
        alpha = simplex_qp(&gram_a, &(a.transpose() * metric * &target));
        let target = a * DVector::from_column_slice(&alpha);
        beta = simplex_qp(&gram_b, &(b.transpose() * metric * &target));
        let diff = a * DVector::from_column_slice(&alpha) - b * DVector::from_column_slice(&beta);
        current = (diff.transpose() * metric * &diff)[(0, 0)];
        if prev - current < CONVERGENCE_TOL {
            break;
        }
        prev = current;
    }
    (current, alpha, beta)
}

/// `argmin_{w ∈ Δ} wᵀGw − 2cᵀw` for positive semidefinite `G`.
pub(crate) fn simplex_qp(gram: &DMatrix<f64>, linear: &DVector<f64>) -> Vec<f64> {
    let m = gram.nrows();
    if m == 1 {
        return vec![1.0];
    }
    if m <= ENUMERATION_LIMIT {
        enumerate_supports(gram, linear)
    } else {
        projected_gradient(gram, linear)
    }
}

fn objective(gram: &DMatrix<f64>, linear: &DVector<f64>, w: &[f64]) -> f64 {
    let w = DVector::from_column_slice(w);
    (w.transpose() * gram * &w)[(0, 0)] - 2.0 * linear.dot(&w)
}

fn enumerate_supports(gram: &DMatrix<f64>, linear: &DVector<f64>) -> Vec<f64> {
    let m = gram.nrows();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let s = support.len();
        // KKT system [2G_SS 1; 1ᵀ 0][w; λ] = [2c_S; 1]
        let mut kkt = DMatrix::zeros(s + 1, s + 1);
        let mut rhs = DVector::zeros(s + 1);
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                kkt[(r, c)] = 2.0 * gram[(i, j)];
            }
            kkt[(r, s)] = 1.0;
            kkt[(s, r)] = 1.0;
            rhs[r] = 2.0 * linear[i];
        }
        rhs[s] = 1.0;
        let Ok(sol) = kkt.svd(true, true).solve(&rhs, 1e-13) else {
            continue;
        };
        if (0..s).any(|r| sol[r] < -1e-12 || !sol[r].is_finite()) {
            continue;
        }
        let mut w = vec![0.0; m];
        for (r, &i) in support.iter().enumerate() {
            w[i] = sol[r].max(0.0);
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        w.iter_mut().for_each(|v| *v /= total);
        let obj = objective(gram, linear, &w);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, w));
        }
    }
    best.map(|(_, w)| w).unwrap_or_else(|| vec![1.0 / m as f64; m])
}

fn projected_gradient(gram: &DMatrix<f64>, linear: &DVector<f64>) -> Vec<f64> {
    let m = gram.nrows();
    let lipschitz = 2.0 * gram.symmetric_eigenvalues().amax().max(1e-300);
    let mut w = DVector::from_element(m, 1.0 / m as f64);
    for _ in 0..100_000 {
        let grad = (gram * &w - linear) * 2.0;
        let next = project_simplex(&(&w - grad / lipschitz));
        let step = (&next - &w).amax();
        w = next;
        if step < 1e-15 {
            break;
        }
    }
    w.iter().copied().collect()
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}
