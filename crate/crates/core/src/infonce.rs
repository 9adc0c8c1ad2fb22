//! InfoNCE over in-batch negatives and its gradients through both towers.
//!
//! With logits `L[i][j] = t_i . v_j / tau`, the text-to-image loss is the mean
//! of `-log softmax(L[i])[i]` over rows; the image-to-text loss does the same
//! over columns. The symmetric loss averages the two.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{dot, AdapterError, AdapterParams, Embedding};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContrastiveError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("{text} text embeddings but {image} image embeddings")]
    LengthMismatch { text: usize, image: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("non-finite embedding or loss")]
    NonFinite,
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfoNceConfig {
    pub temperature: f64,
    /// Average the text-to-image and image-to-text directions.
    pub symmetric: bool,
}

impl Default for InfoNceConfig {
    fn default() -> Self {
        Self { temperature: 0.07, symmetric: true }
    }
}

impl InfoNceConfig {
    pub fn validate(&self) -> Result<(), ContrastiveError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ContrastiveError::Temperature(self.temperature));
        }
        Ok(())
    }
}

/// Loss plus gradients with respect to each embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGradients {
    pub loss: f64,
    pub text: Vec<Vec<f64>>,
    pub image: Vec<Vec<f64>>,
}

fn check_batch(text: &[&Embedding], image: &[&Embedding]) -> Result<usize, ContrastiveError> {
    if text.len() != image.len() {
        return Err(ContrastiveError::LengthMismatch { text: text.len(), image: image.len() });
    }
    let first = text.first().ok_or(ContrastiveError::EmptyBatch)?;
    let dim = first.dim();
    for e in text.iter().chain(image) {
        if e.dim() != dim {
            return Err(ContrastiveError::DimMismatch { expected: dim, actual: e.dim() });
        }
        if !e.is_finite() {
            return Err(ContrastiveError::NonFinite);
        }
    }
    Ok(text.len())
}

/// Log-sum-exp of `xs`, stabilized by the maximum.
fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + libm::log(xs.map(|x| libm::exp(x - m)).sum::<f64>())
}

/// Loss and `dL/dlogits` (row-major `n x n`).
fn loss_and_logit_grad(logits: &[f64], n: usize, symmetric: bool) -> (f64, Vec<f64>) {
    let nf = n as f64;
    let mut grad = vec![0.0; n * n];
    let weight = if symmetric { 0.5 } else { 1.0 };

    let mut row_loss = 0.0;
    for i in 0..n {
        let row = &logits[i * n..(i + 1) * n];
        let lse = log_sum_exp(row.iter().copied());
        row_loss += lse - row[i];
        for j in 0..n {
            let p = libm::exp(row[j] - lse);
            grad[i * n + j] += weight * (p - if i == j { 1.0 } else { 0.0 }) / nf;
        }
    }
    let mut loss = row_loss / nf;

    if symmetric {
        let mut col_loss = 0.0;
        for j in 0..n {
            let col = (0..n).map(|i| logits[i * n + j]);
            let lse = log_sum_exp(col);
            col_loss += lse - logits[j * n + j];
            for i in 0..n {
                let p = libm::exp(logits[i * n + j] - lse);
                grad[i * n + j] += weight * (p - if i == j { 1.0 } else { 0.0 }) / nf;
            }
        }
        loss = 0.5 * (loss + col_loss / nf);
    }
    (loss, grad)
}

fn logits(text: &[&Embedding], image: &[&Embedding], tau: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(text.len() * image.len());
    for t in text {
        for v in image {
            out.push(t.dot(v) / tau);
        }
    }
    out
}

/// InfoNCE loss for paired rows of `text` and `image`.
pub fn info_nce_loss(text: &[&Embedding], image: &[&Embedding], cfg: &InfoNceConfig) -> Result<f64, ContrastiveError> {
    cfg.validate()?;
    let n = check_batch(text, image)?;
    let (loss, _) = loss_and_logit_grad(&logits(text, image, cfg.temperature), n, cfg.symmetric);
    if !loss.is_finite() {
        return Err(ContrastiveError::NonFinite);
    }
    Ok(loss)
}

/// InfoNCE loss and its gradient with respect to every embedding.
pub fn info_nce_embedding_gradients(
    text: &[&Embedding],
    image: &[&Embedding],
    cfg: &InfoNceConfig,
) -> Result<EmbeddingGradients, ContrastiveError> {
    cfg.validate()?;
    let n = check_batch(text, image)?;
    let tau = cfg.temperature;
    let (loss, g) = loss_and_logit_grad(&logits(text, image, tau), n, cfg.symmetric);
    if !loss.is_finite() {
        return Err(ContrastiveError::NonFinite);
    }
    let dim = text[0].dim();
    let mut d_text = vec![vec![0.0; dim]; n];
    let mut d_image = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for j in 0..n {
            let gij = g[i * n + j] / tau;
            if gij == 0.0 {
                continue;
            }
            for ((dt, dv), (t, v)) in d_text[i]
                .iter_mut()
                .zip(d_image[j].iter_mut())
                .zip(text[i].values().iter().zip(image[j].values()))
            {
                *dt += gij * v;
                *dv += gij * t;
            }
        }
    }
    Ok(EmbeddingGradients { loss, text: d_text, image: d_image })
}

/// Loss and gradients for both adapter towers.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerGradients {
    pub loss: f64,
    pub text: AdapterParams,
    pub image: AdapterParams,
}

/// Forward both towers over a batch of `(text_base, image_base)` pairs, evaluate
/// InfoNCE on the adapted embeddings and backpropagate into every parameter.
/// Per-example contributions are accumulated in batch order.
pub fn info_nce_gradients(
    text_params: &AdapterParams,
    image_params: &AdapterParams,
    batch: &[(&Embedding, &Embedding)],
    cfg: &InfoNceConfig,
) -> Result<TowerGradients, ContrastiveError> {
    let text_caches = batch
        .iter()
        .map(|(t, _)| text_params.forward_cached(t))
        .collect::<Result<Vec<_>, _>>()?;
    let image_caches = batch
        .iter()
        .map(|(_, v)| image_params.forward_cached(v))
        .collect::<Result<Vec<_>, _>>()?;
    let t_out: Vec<&Embedding> = text_caches.iter().map(|c| &c.output).collect();
    let v_out: Vec<&Embedding> = image_caches.iter().map(|c| &c.output).collect();
    let eg = info_nce_embedding_gradients(&t_out, &v_out, cfg)?;

    let mut text = text_params.zeros_like();
    let mut image = image_params.zeros_like();
    for (k, (t, v)) in batch.iter().enumerate() {
        text_params.backward(t, &text_caches[k], &eg.text[k], &mut text);
        image_params.backward(v, &image_caches[k], &eg.image[k], &mut image);
    }
    Ok(TowerGradients { loss: eg.loss, text, image })
}

/// Cosine between two vectors (zero when either is zero).
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = libm::sqrt(dot(a, a));
    let nb = libm::sqrt(dot(b, b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec())
    }

    /// Loss evaluated literally from the definition: explicit softmax
    /// probabilities, no log-sum-exp.
    fn direct_loss(t: &[Embedding], v: &[Embedding], tau: f64, symmetric: bool) -> f64 {
        let n = t.len();
        let l = |i: usize, j: usize| t[i].dot(&v[j]) / tau;
        let mut row = 0.0;
        for i in 0..n {
            let z: f64 = (0..n).map(|j| l(i, j).exp()).sum();
            row -= (l(i, i).exp() / z).ln();
        }
        row /= n as f64;
        if !symmetric {
            return row;
        }
        let mut col = 0.0;
        for j in 0..n {
            let z: f64 = (0..n).map(|i| l(i, j).exp()).sum();
            col -= (l(j, j).exp() / z).ln();
        }
        0.5 * (row + col / n as f64)
    }

    fn refs(v: &[Embedding]) -> Vec<&Embedding> {
        v.iter().collect()
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let t = [e(&[0.6, 0.8])];
        let v = [e(&[1.0, 0.0])];
        for tau in [0.01, 0.07, 1.0, 10.0] {
            let cfg = InfoNceConfig { temperature: tau, symmetric: true };
            assert_eq!(info_nce_loss(&refs(&t), &refs(&v), &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn orthogonal_pair_closed_form() {
        let t = [e(&[1.0, 0.0]), e(&[0.0, 1.0])];
        let cfg = InfoNceConfig { temperature: 1.0, symmetric: true };
        let loss = info_nce_loss(&refs(&t), &refs(&t), &cfg).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((loss - expected).abs() <= 1e-12, "{loss} vs {expected}");
        assert!((loss - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn antipodal_negatives_at_low_temperature() {
        let t = [e(&[1.0, 0.0]), e(&[-1.0, 0.0])];
        let cfg = InfoNceConfig { temperature: 0.05, symmetric: true };
        assert!(info_nce_loss(&refs(&t), &refs(&t), &cfg).unwrap() < 1e-10);
    }

    #[test]
    fn matches_direct_softmax_on_random_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            for _ in 0..25 {
                let mut gen = || {
                    let mut v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                    crate::featurize::l2_normalize(&mut v);
                    Embedding::new(v)
                };
                let t: Vec<_> = (0..n).map(|_| gen()).collect();
                let v: Vec<_> = (0..n).map(|_| gen()).collect();
                for symmetric in [false, true] {
                    let cfg = InfoNceConfig { temperature: 0.5, symmetric };
                    let got = info_nce_loss(&refs(&t), &refs(&v), &cfg).unwrap();
                    assert!((got - direct_loss(&t, &v, 0.5, symmetric)).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn errors() {
        let cfg = InfoNceConfig::default();
        let a = e(&[1.0, 0.0]);
        let b = e(&[1.0, 0.0, 0.0]);
        assert_eq!(info_nce_loss(&[], &[], &cfg), Err(ContrastiveError::EmptyBatch));
        assert_eq!(
            info_nce_loss(&[&a], &[&b], &cfg),
            Err(ContrastiveError::DimMismatch { expected: 2, actual: 3 })
        );
        let nan = e(&[f64::NAN, 0.0]);
        assert_eq!(info_nce_loss(&[&nan], &[&a], &cfg), Err(ContrastiveError::NonFinite));
        let bad = InfoNceConfig { temperature: 0.0, symmetric: true };
        assert_eq!(info_nce_loss(&[&a], &[&a], &bad), Err(ContrastiveError::Temperature(0.0)));
    }

    #[test]
    fn single_pair_batch_has_zero_gradients() {
        let tp = AdapterParams::init(1, [4, 6, 6, 3]).unwrap();
        let ip = AdapterParams::init(2, [5, 6, 6, 3]).unwrap();
        let t = e(&[0.1, 0.2, 0.3, 0.4]);
        let v = e(&[0.5, 0.1, 0.2, 0.3, 0.9]);
        let g = info_nce_gradients(&tp, &ip, &[(&t, &v)], &InfoNceConfig::default()).unwrap();
        assert_eq!(g.loss, 0.0);
        for tensor in g.text.tensors().iter().chain(g.image.tensors().iter()) {
            assert!(tensor.iter().all(|x| *x == 0.0));
        }
    }

    proptest::proptest! {
        #[test]
        fn loss_is_nonnegative_and_permutation_invariant(
            seed in 0u64..10_000,
            n in 1usize..6,
            tau in 0.05f64..2.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gen = || {
                let mut v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                crate::featurize::l2_normalize(&mut v);
                Embedding::new(v)
            };
            let t: Vec<_> = (0..n).map(|_| gen()).collect();
            let v: Vec<_> = (0..n).map(|_| gen()).collect();
            let cfg = InfoNceConfig { temperature: tau, symmetric: true };
            let loss = info_nce_loss(&refs(&t), &refs(&v), &cfg).unwrap();
            proptest::prop_assert!(loss >= 0.0);
            let rt: Vec<&Embedding> = t.iter().rev().collect();
            let rv: Vec<&Embedding> = v.iter().rev().collect();
            let permuted = info_nce_loss(&rt, &rv, &cfg).unwrap();
            proptest::prop_assert!((loss - permuted).abs() <= 1e-12);
        }
    }
}
