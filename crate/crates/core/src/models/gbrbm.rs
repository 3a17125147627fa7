use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{sigmoid, softplus};

/// Gauss-Bernoulli RBM with unit visible variance.
///
/// Unnormalized density `exp(-E(x))` with
/// `E(x) = ½‖x − b‖² − Σ_j softplus(w_jᵀx + c_j)`, `w_j` the j-th column of `W`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GbrbmRepr", into = "GbrbmRepr")]
pub struct Gbrbm {
    visible: usize,
    hidden: usize,
    /// Row-major `visible × hidden`.
    w: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    col_norm_sq: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GbrbmRepr {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl TryFrom<GbrbmRepr> for Gbrbm {
    type Error = Error;

    fn try_from(r: GbrbmRepr) -> Result<Self> {
        let hidden = r.c.len();
        if r.w.len() != r.b.len() || r.w.iter().any(|row| row.len() != hidden) {
            return Err(Error::InvalidModel(format!(
                "gbrbm: W must be {}x{}",
                r.b.len(),
                hidden
            )));
        }
        Gbrbm::new(r.w.concat(), r.b, r.c)
    }
}

impl From<Gbrbm> for GbrbmRepr {
    fn from(g: Gbrbm) -> Self {
        GbrbmRepr { w: g.w.chunks(g.hidden).map(<[f64]>::to_vec).collect(), b: g.b, c: g.c }
    }
}

impl Gbrbm {
    /// `w` is row-major with `b.len()` rows and `c.len()` columns.
    pub fn new(w: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let (visible, hidden) = (b.len(), c.len());
        if visible == 0 {
            return Err(Error::InvalidModel("gbrbm: no visible units".into()));
        }
        if w.len() != visible * hidden {
            return Err(Error::InvalidModel(format!(
                "gbrbm: W has {} entries, expected {visible}x{hidden}",
                w.len()
            )));
        }
        if w.iter().chain(&b).chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("gbrbm: non-finite parameter".into()));
        }
        let col_norm_sq = (0..hidden)
            .map(|j| (0..visible).map(|i| w[i * hidden + j].powi(2)).sum())
            .collect();
        Ok(Self { visible, hidden, w, b, c, col_norm_sq })
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.b
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.c
    }

    /// Same biases, every weight shifted by `delta`.
    pub fn with_weight_shift(&self, delta: f64) -> Self {
        let w = self.w.iter().map(|v| v + delta).collect();
        Self::new(w, self.b.clone(), self.c.clone()).expect("shifted parameters stay finite")
    }

    /// Hidden pre-activations `Wᵀx + c`.
    pub(crate) fn hidden_input(&self, x: &[f64]) -> Vec<f64> {
        let mut a = self.c.clone();
        for (i, xi) in x.iter().enumerate() {
            let row = &self.w[i * self.hidden..(i + 1) * self.hidden];
            for (aj, wij) in a.iter_mut().zip(row) {
                *aj += wij * xi;
            }
        }
        a
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        let quad: f64 = x.iter().zip(&self.b).map(|(xi, bi)| 0.5 * (xi - bi).powi(2)).sum();
        quad - self.hidden_input(x).into_iter().map(softplus).sum::<f64>()
    }

    /// `b − x + W·sigmoid(Wᵀx + c)`.
    pub(crate) fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let p: Vec<f64> = self.hidden_input(x).into_iter().map(sigmoid).collect();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.w[i * self.hidden..(i + 1) * self.hidden];
            *o = self.b[i] - x[i] + row.iter().zip(&p).map(|(w, p)| w * p).sum::<f64>();
        }
    }

    /// `−v + Σ_j σ'(w_jᵀx + c_j) ‖w_j‖²`, the divergence of the closed-form score.
    pub(crate) fn laplacian_unchecked(&self, x: &[f64]) -> f64 {
        let a = self.hidden_input(x);
        let curvature: f64 = a
            .iter()
            .zip(&self.col_norm_sq)
            .map(|(aj, n)| {
                let s = sigmoid(*aj);
                s * (1.0 - s) * n
            })
            .sum();
        curvature - self.visible as f64
    }

    /// One block-Gibbs sweep: `h ~ Bernoulli(σ(Wᵀx + c))`, then `x ~ N(b + W h, I)`.
    pub(crate) fn gibbs_sweep<R: Rng + ?Sized>(&self, x: &mut [f64], rng: &mut R) {
        let h: Vec<f64> = self
            .hidden_input(x)
            .into_iter()
            .map(|a| {
                let u: f64 = rng.random();
                if u < sigmoid(a) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = self.visible_mean_given_hidden(i, &h) + rng.sample::<f64, _>(StandardNormal);
        }
    }

    pub(crate) fn visible_mean_given_hidden(&self, i: usize, h: &[f64]) -> f64 {
        let row = &self.w[i * self.hidden..(i + 1) * self.hidden];
        self.b[i] + row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>()
    }

    /// Draws `W`, `b`, `c` with i.i.d. standard normal entries.
    pub fn standard_normal<R: Rng + ?Sized>(visible: usize, hidden: usize, rng: &mut R) -> Self {
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
        let w = draw(visible * hidden);
        let b = draw(visible);
        let c = draw(hidden);
        Self::new(w, b, c).expect("finite normal draws")
    }
}
