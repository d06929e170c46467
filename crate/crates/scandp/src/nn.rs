//! Minimal dense layers with manual backprop (f64 throughout). Enough for
//! the pose-history MLP and the diffusion noise predictor; no autograd.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// (out, in)
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    /// Uniform fan-in initialization, deterministic per rng state.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha12Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-bound..bound));
        let bias = Array1::from_shape_fn(out_dim, |_| rng.gen_range(-bound..bound));
        Self { weight, bias }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weight.dot(x) + &self.bias
    }

    /// Backward for y = W x + b: returns dL/dx, accumulates into `grad`.
    pub fn backward(
        &self,
        x: &Array1<f64>,
        dy: &Array1<f64>,
        grad: &mut LinearGrad,
    ) -> Array1<f64> {
        grad.weight += &outer(dy, x);
        grad.bias += dy;
        self.weight.t().dot(dy)
    }

    pub fn grad_zeros(&self) -> LinearGrad {
        LinearGrad {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn sgd_step(&mut self, grad: &LinearGrad, lr: f64) {
        self.weight.scaled_add(-lr, &grad.weight);
        self.bias.scaled_add(-lr, &grad.bias);
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, m) = (a.len(), b.len());
    Array2::from_shape_fn((n, m), |(i, j)| a[i] * b[j])
}

pub fn relu(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn relu_backward(x: &Array1<f64>, dy: &Array1<f64>) -> Array1<f64> {
    Array1::from_shape_fn(x.len(), |i| if x[i] > 0.0 { dy[i] } else { 0.0 })
}

/// Fully connected ReLU network: Linear -> ReLU -> ... -> Linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

#[derive(Debug, Clone)]
pub struct MlpGrad {
    pub layers: Vec<LinearGrad>,
}

impl MlpGrad {
    pub fn add(&mut self, other: &MlpGrad) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.layers {
            g.weight *= s;
            g.bias *= s;
        }
    }
}

/// Per-layer pre-activation cache from a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// inputs[k] is the input to layer k.
    pub inputs: Vec<Array1<f64>>,
    /// pre[k] is the pre-activation output of layer k.
    pub pre: Vec<Array1<f64>>,
}

impl Mlp {
    /// `dims` = [in, hidden..., out].
    pub fn init(dims: &[usize], rng: &mut ChaCha12Rng) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .map(|w| Linear::init(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.forward_cached(x).1
    }

    pub fn forward_cached(&self, x: &Array1<f64>) -> (MlpCache, Array1<f64>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            inputs.push(cur.clone());
            let z = layer.forward(&cur);
            pre.push(z.clone());
            cur = if k + 1 < self.layers.len() { relu(&z) } else { z };
        }
        (MlpCache { inputs, pre }, cur)
    }

    /// Returns dL/dinput, accumulating parameter grads.
    pub fn backward(&self, cache: &MlpCache, dy: &Array1<f64>, grad: &mut MlpGrad) -> Array1<f64> {
        let mut d = dy.clone();
        for k in (0..self.layers.len()).rev() {
            if k + 1 < self.layers.len() {
                d = relu_backward(&cache.pre[k], &d);
            }
            d = self.layers[k].backward(&cache.inputs[k], &d, &mut grad.layers[k]);
        }
        d
    }

    pub fn grad_zeros(&self) -> MlpGrad {
        MlpGrad {
            layers: self.layers.iter().map(|l| l.grad_zeros()).collect(),
        }
    }

    pub fn sgd_step(&mut self, grad: &MlpGrad, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grad.layers) {
            layer.sgd_step(g, lr);
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }
}

/// Sinusoidal timestep embedding of dimension `dim` (even).
pub fn timestep_embedding(k: usize, dim: usize) -> Array1<f64> {
    assert!(dim % 2 == 0);
    let half = dim / 2;
    let mut out = Array1::zeros(dim);
    for i in 0..half {
        let freq = (10_000f64).powf(-(i as f64) / half as f64);
        let angle = k as f64 * freq;
        out[i] = angle.sin();
        out[half + i] = angle.cos();
    }
    out
}
