//! Softmax-headed perceptron mapping an observation to simplex weights.
//!
//! Architecture is fixed to `input → hidden (ReLU) → output (softmax)`.
//! Parameters live in one flat vector so the optimizer, gradient clipping and
//! finite-difference checks all see the same layout:
//! `[W1 (hidden×input), b1 (hidden), W2 (output×hidden), b2 (output)]`, row-major.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct BetaNetwork {
    input: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    layers: [usize; 3],
    hidden_weights: Vec<Vec<f64>>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<Vec<f64>>,
    output_bias: Vec<f64>,
}

impl TryFrom<NetworkRepr> for BetaNetwork {
    type Error = Error;

    fn try_from(r: NetworkRepr) -> Result<Self> {
        let [input, hidden, output] = r.layers;
        let shape_ok = r.hidden_weights.len() == hidden
            && r.hidden_weights.iter().all(|row| row.len() == input)
            && r.hidden_bias.len() == hidden
            && r.output_weights.len() == output
            && r.output_weights.iter().all(|row| row.len() == hidden)
            && r.output_bias.len() == output;
        if !shape_ok {
            return Err(Error::InvalidModel(format!(
                "beta network: arrays do not match layers {:?}",
                r.layers
            )));
        }
        let mut params = r.hidden_weights.concat();
        params.extend(r.hidden_bias);
        params.extend(r.output_weights.concat());
        params.extend(r.output_bias);
        BetaNetwork::from_params(input, hidden, output, params)
    }
}

impl From<BetaNetwork> for NetworkRepr {
    fn from(n: BetaNetwork) -> Self {
        let (w1, b1, w2, b2) = n.split();
        NetworkRepr {
            layers: [n.input, n.hidden, n.output],
            hidden_weights: w1.chunks(n.input).map(<[f64]>::to_vec).collect(),
            hidden_bias: b1.to_vec(),
            output_weights: w2.chunks(n.hidden).map(<[f64]>::to_vec).collect(),
            output_bias: b2.to_vec(),
        }
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
    hidden * input + hidden + output * hidden + output
}

impl BetaNetwork {
    pub fn from_params(input: usize, hidden: usize, output: usize, params: Vec<f64>) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::InvalidModel("beta network: layer of size zero".into()));
        }
        if params.len() != param_count(input, hidden, output) {
            return Err(Error::InvalidModel(format!(
                "beta network: {} parameters, expected {}",
                params.len(),
                param_count(input, hidden, output)
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidModel("beta network: non-finite parameter".into()));
        }
        Ok(Self { input, hidden, output, params })
    }

    /// He-scaled normal hidden weights, small output weights, zero biases.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut params = vec![0.0; param_count(input, hidden, output)];
        let he = (2.0 / input as f64).sqrt();
        for p in &mut params[..hidden * input] {
            *p = he * rng.sample::<f64, _>(StandardNormal);
        }
        let off = hidden * input + hidden;
        for p in &mut params[off..off + output * hidden] {
            *p = 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        Self::from_params(input, hidden, output, params).expect("valid shapes")
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.params.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.output * self.hidden);
        (w1, b1, w2, b2)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Activations {
        let (w1, b1, w2, b2) = self.split();
        let hidden_pre: Vec<f64> = w1
            .chunks(self.input)
            .zip(b1)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect();
        let hidden: Vec<f64> = hidden_pre.iter().map(|a| a.max(0.0)).collect();
        let logits: Vec<f64> = w2
            .chunks(self.hidden)
            .zip(b2)
            .map(|(row, b)| b + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>())
            .collect();
        let beta = softmax(&logits);
        debug_assert!((beta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Activations { hidden_pre, hidden, beta }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).beta
    }

    /// Accumulates `∂L/∂θ` into `grad`, given `∂L/∂β` at one input.
    pub fn backward(&self, x: &[f64], act: &Activations, dbeta: &[f64], grad: &mut [f64]) {
        let (_, _, w2, _) = self.split();
        let (h, d, m) = (self.hidden, self.input, self.output);
        // softmax Jacobian: dlogit_k = β_k (g_k − βᵀg)
        let avg: f64 = act.beta.iter().zip(dbeta).map(|(b, g)| b * g).sum();
        let dlogit: Vec<f64> = act.beta.iter().zip(dbeta).map(|(b, g)| b * (g - avg)).collect();

        let (gw1, rest) = grad.split_at_mut(h * d);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(m * h);

        let mut dhidden = vec![0.0; h];
        for k in 0..m {
            gb2[k] += dlogit[k];
            for j in 0..h {
                gw2[k * h + j] += dlogit[k] * act.hidden[j];
                dhidden[j] += dlogit[k] * w2[k * h + j];
            }
        }
        for j in 0..h {
            if act.hidden_pre[j] <= 0.0 {
                continue;
            }
            gb1[j] += dhidden[j];
            for (g, xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                *g += dhidden[j] * xi;
            }
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}
