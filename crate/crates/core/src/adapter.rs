//! Embeddings and the three-layer ReLU adapter towers that map base features
//! into the shared retrieval space.
//!
//! A tower computes `y = normalize(W3 relu(W2 relu(W1 x + b1) + b2) + b3)`.
//! Weights are stored row-major as `d_in x d_out`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdapterError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("adapter dims must be positive, got {0:?}")]
    ZeroDim([usize; 4]),
    #[error("adapter output is the zero vector and cannot be normalized")]
    ZeroOutput,
    #[error("non-finite value in adapter input or parameters")]
    NonFinite,
}

/// A dense real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|x| x * x).sum())
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One affine layer, `z = x W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub d_in: usize,
    pub d_out: usize,
    /// Row-major `d_in x d_out`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(d_in: usize, d_out: usize) -> Self {
        Self { d_in, d_out, weights: vec![0.0; d_in * d_out], bias: vec![0.0; d_out] }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (xi, row) in x.iter().zip(self.weights.chunks_exact(self.d_out)) {
            if *xi == 0.0 {
                continue;
            }
            for (zj, w) in z.iter_mut().zip(row) {
                *zj += xi * w;
            }
        }
        z
    }

    /// Accumulate parameter gradients into `grad` and return `dL/dx`.
    fn backward(&self, x: &[f64], dz: &[f64], grad: &mut Layer) -> Vec<f64> {
        let mut dx = vec![0.0; self.d_in];
        for (gb, d) in grad.bias.iter_mut().zip(dz) {
            *gb += d;
        }
        for (i, (row, grow)) in self.weights.chunks_exact(self.d_out).zip(grad.weights.chunks_exact_mut(self.d_out)).enumerate() {
            let xi = x[i];
            let mut acc = 0.0;
            for ((w, gw), d) in row.iter().zip(grow.iter_mut()).zip(dz) {
                *gw += xi * d;
                acc += w * d;
            }
            dx[i] = acc;
        }
        dx
    }
}

/// Parameters of one adapter tower (three layers, ReLU after the first two,
/// L2 normalization on the output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterParams {
    pub layers: [Layer; 3],
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub z3: Vec<f64>,
    pub norm: f64,
    pub output: Embedding,
}

fn relu(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    v
}

impl AdapterParams {
    /// He-style uniform init, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn init(seed: u64, dims: [usize; 4]) -> Result<Self, AdapterError> {
        if dims.contains(&0) {
            return Err(AdapterError::ZeroDim(dims));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |d_in: usize, d_out: usize| {
            let bound = libm::sqrt(6.0 / d_in as f64);
            let mut l = Layer::zeros(d_in, d_out);
            l.weights.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
            l
        };
        let layers = [layer(dims[0], dims[1]), layer(dims[1], dims[2]), layer(dims[2], dims[3])];
        Ok(Self { layers })
    }

    /// Build from explicit layers, checking that dims chain.
    pub fn from_layers(layers: [Layer; 3]) -> Result<Self, AdapterError> {
        for l in &layers {
            if l.weights.len() != l.d_in * l.d_out {
                return Err(AdapterError::DimMismatch { expected: l.d_in * l.d_out, actual: l.weights.len() });
            }
            if l.bias.len() != l.d_out {
                return Err(AdapterError::DimMismatch { expected: l.d_out, actual: l.bias.len() });
            }
        }
        for pair in layers.windows(2) {
            if pair[0].d_out != pair[1].d_in {
                return Err(AdapterError::DimMismatch { expected: pair[0].d_out, actual: pair[1].d_in });
            }
        }
        let p = Self { layers };
        if !p.is_finite() {
            return Err(AdapterError::NonFinite);
        }
        Ok(p)
    }

    /// Same shape, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let layers = self.layers.clone().map(|l| Layer::zeros(l.d_in, l.d_out));
        Self { layers }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.layers[0].d_in, self.layers[1].d_in, self.layers[2].d_in, self.layers[2].d_out]
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].d_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[2].d_out
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// The six parameter tensors: `W1, b1, W2, b2, W3, b3`.
    pub fn tensors(&self) -> [&[f64]; 6] {
        let [a, b, c] = &self.layers;
        [&a.weights, &a.bias, &b.weights, &b.bias, &c.weights, &c.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        let [a, b, c] = &mut self.layers;
        [&mut a.weights, &mut a.bias, &mut b.weights, &mut b.bias, &mut c.weights, &mut c.bias]
    }

    /// Forward pass keeping activations for [`backward`](Self::backward).
    /// A zero pre-normalization output (every path through the ReLUs dead)
    /// yields a zero `output` here; gradients through it are zero.
    pub fn forward_cached(&self, x: &Embedding) -> Result<ForwardCache, AdapterError> {
        if x.dim() != self.input_dim() {
            return Err(AdapterError::DimMismatch { expected: self.input_dim(), actual: x.dim() });
        }
        let h1 = relu(self.layers[0].forward(x.values()));
        let h2 = relu(self.layers[1].forward(&h1));
        let z3 = self.layers[2].forward(&h2);
        let norm = libm::sqrt(z3.iter().map(|v| v * v).sum::<f64>());
        if !norm.is_finite() {
            return Err(AdapterError::NonFinite);
        }
        let output = if norm == 0.0 { z3.clone() } else { z3.iter().map(|v| v / norm).collect() };
        Ok(ForwardCache { h1, h2, z3, norm, output: Embedding::new(output) })
    }

    /// Unit-norm projection of `x` into the shared space.
    pub fn forward(&self, x: &Embedding) -> Result<Embedding, AdapterError> {
        let cache = self.forward_cached(x)?;
        if cache.norm == 0.0 {
            return Err(AdapterError::ZeroOutput);
        }
        Ok(cache.output)
    }

    /// Backpropagate `d_output = dL/dy` through the tower for input `x`,
    /// accumulating parameter gradients into `grad`.
    pub fn backward(&self, x: &Embedding, cache: &ForwardCache, d_output: &[f64], grad: &mut AdapterParams) {
        if cache.norm == 0.0 {
            return;
        }
        let y = cache.output.values();
        // y = z / |z|  =>  dz = (dy - y (y . dy)) / |z|
        let proj = dot(y, d_output);
        let dz3: Vec<f64> = d_output.iter().zip(y).map(|(d, yi)| (d - yi * proj) / cache.norm).collect();

        let [g1, g2, g3] = &mut grad.layers;
        let dh2 = self.layers[2].backward(&cache.h2, &dz3, g3);
        let dz2: Vec<f64> = dh2.iter().zip(&cache.h2).map(|(d, h)| if *h > 0.0 { *d } else { 0.0 }).collect();
        let dh1 = self.layers[1].backward(&cache.h1, &dz2, g2);
        let dz1: Vec<f64> = dh1.iter().zip(&cache.h1).map(|(d, h)| if *h > 0.0 { *d } else { 0.0 }).collect();
        self.layers[0].backward(x.values(), &dz1, g1);
    }
}
