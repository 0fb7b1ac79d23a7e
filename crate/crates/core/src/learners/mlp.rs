//! Fully connected regression network trained by mini-batch SGD.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DlParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// max(0, z)
    Rectifier,
    Tanh,
    /// Exponential linear unit with alpha = 1.
    ExpRectifier,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Tanh, Activation::Rectifier, Activation::ExpRectifier];

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Rectifier => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::ExpRectifier => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::ExpRectifier => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
        }
    }

    /// Squared gain of the uniform initialisation range.
    fn init_gain(self) -> f64 {
        match self {
            Activation::Tanh => 1.0,
            Activation::Rectifier | Activation::ExpRectifier => 2.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Rectifier => "Rectifier",
            Activation::Tanh => "Tanh",
            Activation::ExpRectifier => "ExpRectifier",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectifier" | "relu" => Ok(Activation::Rectifier),
            "tanh" => Ok(Activation::Tanh),
            "exprectifier" | "elu" => Ok(Activation::ExpRectifier),
            _ => Err(Error::InvalidConfig(format!("unknown activation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out × n_in`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let w = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            b + w.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()
        }));
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Network with hidden activations and a linear scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    activation: Activation,
    layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes` lists the input width, every hidden width, and ends with 1.
    /// Weights are uniform in ±sqrt(3·gain / fan_in); biases start at zero.
    pub fn new(sizes: &[usize], activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(sizes, activation, &mut rng)
    }

    fn with_rng(sizes: &[usize], activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        assert!(
            sizes.len() >= 2 && *sizes.last().unwrap() == 1,
            "output layer must have width 1"
        );
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (3.0 * activation.init_gain() / n_in.max(1) as f64).sqrt();
                Dense {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| rng.gen_range(-limit..limit)).collect(),
                    bias: vec![0.0; n_out],
                }
            })
            .collect();
        Mlp { activation, layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
    }

    pub fn forward(&self, input: &[f64]) -> f64 {
        let mut a = input.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            l.forward(&a, &mut z);
            if li < last {
                a = z.iter().map(|&v| self.activation.apply(v)).collect();
            } else {
                a = z.clone();
            }
        }
        a[0]
    }

    /// Loss `mean(0.5 · (f(x) - y)²)` over the rows and its gradient, flattened like [`params`](Self::params).
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[f64]) -> (f64, Vec<f64>) {
        let rows: Vec<usize> = (0..x.rows()).collect();
        self.batch_gradient(x, y, &rows)
    }

    fn batch_gradient(&self, x: &Matrix, y: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let n_layers = self.layers.len();
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        // Per-layer pre-activations and activations (activations[0] is the input).
        let mut pre: Vec<Vec<f64>> = vec![Vec::new(); n_layers];
        let mut act: Vec<Vec<f64>> = vec![Vec::new(); n_layers + 1];
        for &r in rows {
            act[0].clear();
            act[0].extend_from_slice(x.row(r));
            for (li, l) in self.layers.iter().enumerate() {
                let (before, after) = act.split_at_mut(li + 1);
                l.forward(&before[li], &mut pre[li]);
                after[0].clear();
                if li + 1 < n_layers {
                    after[0].extend(pre[li].iter().map(|&v| self.activation.apply(v)));
                } else {
                    after[0].extend_from_slice(&pre[li]);
                }
            }
            let err = act[n_layers][0] - y[r];
            loss += 0.5 * err * err * scale;

            let mut delta = vec![err * scale];
            for li in (0..n_layers).rev() {
                let l = &self.layers[li];
                let (gw, gb) = &mut grads[li];
                for (o, d) in delta.iter().enumerate() {
                    gb[o] += d;
                    let row = &mut gw[o * l.n_in..(o + 1) * l.n_in];
                    for (g, a) in row.iter_mut().zip(&act[li]) {
                        *g += d * a;
                    }
                }
                if li > 0 {
                    let mut next = vec![0.0; l.n_in];
                    for (o, d) in delta.iter().enumerate() {
                        let w = &l.weights[o * l.n_in..(o + 1) * l.n_in];
                        for (nx, wv) in next.iter_mut().zip(w) {
                            *nx += d * wv;
                        }
                    }
                    for (nx, z) in next.iter_mut().zip(&pre[li - 1]) {
                        *nx *= self.activation.derivative(*z);
                    }
                    delta = next;
                }
            }
        }
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads {
            flat.extend(gw);
            flat.extend(gb);
        }
        (loss, flat)
    }

    fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        let mut at = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w -= lr * grad[at];
                at += 1;
            }
        }
    }
}

/// Network plus the target scaling it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRegressor {
    net: Mlp,
    y_mean: f64,
    y_scale: f64,
}

impl MlpRegressor {
    /// Trains on standardized inputs. Targets are standardized internally and
    /// mapped back at prediction time. All randomness (initial weights and
    /// per-epoch shuffles) comes from `seed`.
    pub(crate) fn fit(x: &Matrix, y: &[f64], params: &DlParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![x.cols()];
        sizes.extend_from_slice(&params.hidden_layers);
        sizes.push(1);
        let mut net = Mlp::with_rng(&sizes, params.activation, &mut rng);

        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        let y_scale = if sd > 0.0 { sd } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();

        let mut order: Vec<usize> = (0..y.len()).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let (_, grad) = net.batch_gradient(x, &ys, batch);
                net.sgd_step(&grad, params.learning_rate);
            }
            if net.params().iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFiniteData("network weights (training diverged)".into()));
            }
        }
        Ok(MlpRegressor { net, y_mean, y_scale })
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn predict_one(&self, row: &[f64]) -> f64 {
        self.y_mean + self.y_scale * self.net.forward(row)
    }
}
