//! Retriever training: mini-batch InfoNCE with (momentum) SGD over both
//! adapter towers, and recall@k evaluation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{AdapterError, AdapterParams, Embedding};
use crate::infonce::{info_nce_gradients, ContrastiveError, InfoNceConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("need at least {needed} pairs for batch size {batch}, got {got}")]
    TooFewPairs { needed: usize, batch: usize, got: usize },
    #[error("batch size must be at least 2, got {0}")]
    BatchSize(usize),
    #[error("learning rate must be non-negative and finite, got {0}")]
    LearningRate(f64),
    #[error("momentum must lie in [0, 1), got {0}")]
    Momentum(f64),
    #[error("loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("pair `{id}` has {what} dim {actual}, expected {expected}")]
    PairDim { id: String, what: &'static str, expected: usize, actual: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no pairs to evaluate")]
    NoPairs,
    #[error(transparent)]
    Contrastive(#[from] ContrastiveError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

/// A question/diagram training pair in base-feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub id: String,
    pub text: Embedding,
    pub image: Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Momentum { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub shuffle: bool,
    /// Hidden widths of both towers.
    pub hidden: [usize; 2],
    /// Shared embedding dimension.
    pub shared_dim: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 50,
            seed: 42,
            optimizer: Optimizer::Momentum { beta: 0.9 },
            shuffle: true,
            hidden: [256, 256],
            shared_dim: 64,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::LearningRate(self.learning_rate));
        }
        if self.batch_size < 2 {
            return Err(TrainError::BatchSize(self.batch_size));
        }
        if let Optimizer::Momentum { beta } = self.optimizer {
            if !(0.0..1.0).contains(&beta) {
                return Err(TrainError::Momentum(beta));
            }
        }
        Ok(())
    }

    pub fn tower_dims(&self, input_dim: usize) -> [usize; 4] {
        [input_dim, self.hidden[0], self.hidden[1], self.shared_dim]
    }

    /// Seeds for the text tower, image tower and shuffle order.
    fn seeds(&self) -> (u64, u64, u64) {
        (self.seed, self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15), self.seed ^ 0x5851_f42d_4c95_7f2d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub recall_at_1: f64,
    pub recall_at_5: f64,
    /// `"heldout"` or `"train"`.
    pub recall_split: String,
    pub train_pairs: usize,
    pub eval_pairs: usize,
    /// Filled in by callers that can read a clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRetriever {
    pub text: AdapterParams,
    pub image: AdapterParams,
    pub report: TrainReport,
}

struct Velocity {
    text: AdapterParams,
    image: AdapterParams,
}

fn sgd_step(params: &mut AdapterParams, grad: &AdapterParams, velocity: &mut AdapterParams, lr: f64, beta: f64) {
    for ((p, g), v) in params.tensors_mut().into_iter().zip(grad.tensors()).zip(velocity.tensors_mut()) {
        for ((pi, gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = beta * *vi + gi;
            *pi -= lr * *vi;
        }
    }
}

fn check_dims(pairs: &[Pair]) -> Result<(usize, usize), TrainError> {
    let first = pairs.first().ok_or(TrainError::NoPairs)?;
    let (dt, di) = (first.text.dim(), first.image.dim());
    for p in pairs {
        if p.text.dim() != dt {
            return Err(TrainError::PairDim { id: p.id.clone(), what: "text", expected: dt, actual: p.text.dim() });
        }
        if p.image.dim() != di {
            return Err(TrainError::PairDim { id: p.id.clone(), what: "image", expected: di, actual: p.image.dim() });
        }
    }
    Ok((dt, di))
}

/// Train both towers from freshly initialized parameters.
///
/// Recall in the report is measured on `heldout` when given, otherwise on
/// the training pairs. Deterministic for a fixed config and input order.
pub fn train_retriever(
    pairs: &[Pair],
    heldout: Option<&[Pair]>,
    cfg: &TrainerConfig,
    infonce: &InfoNceConfig,
) -> Result<TrainedRetriever, TrainError> {
    cfg.validate()?;
    infonce.validate()?;
    let needed = 2 * cfg.batch_size;
    if pairs.len() < needed {
        return Err(TrainError::TooFewPairs { needed, batch: cfg.batch_size, got: pairs.len() });
    }
    let (dt, di) = check_dims(pairs)?;
    let (text_seed, image_seed, shuffle_seed) = cfg.seeds();
    let text = AdapterParams::init(text_seed, cfg.tower_dims(dt))?;
    let image = AdapterParams::init(image_seed, cfg.tower_dims(di))?;
    continue_training(text, image, pairs, heldout, cfg, infonce, shuffle_seed)
}

/// Train from given starting parameters.
pub fn continue_training(
    mut text: AdapterParams,
    mut image: AdapterParams,
    pairs: &[Pair],
    heldout: Option<&[Pair]>,
    cfg: &TrainerConfig,
    infonce: &InfoNceConfig,
    shuffle_seed: u64,
) -> Result<TrainedRetriever, TrainError> {
    cfg.validate()?;
    let beta = match cfg.optimizer {
        Optimizer::Sgd => 0.0,
        Optimizer::Momentum { beta } => beta,
    };
    let mut velocity = Velocity { text: text.zeros_like(), image: image.zeros_like() };
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<(&Embedding, &Embedding)> = chunk.iter().map(|&i| (&pairs[i].text, &pairs[i].image)).collect();
            let g = match info_nce_gradients(&text, &image, &batch, infonce) {
                Ok(g) => g,
                Err(ContrastiveError::NonFinite | ContrastiveError::Adapter(AdapterError::NonFinite)) => {
                    return Err(TrainError::DivergedLoss { epoch })
                }
                Err(e) => return Err(e.into()),
            };
            if !g.loss.is_finite() {
                return Err(TrainError::DivergedLoss { epoch });
            }
            sgd_step(&mut text, &g.text, &mut velocity.text, cfg.learning_rate, beta);
            sgd_step(&mut image, &g.image, &mut velocity.image, cfg.learning_rate, beta);
            loss_sum += g.loss;
            batches += 1;
        }
        let mean = loss_sum / batches.max(1) as f64;
        if !mean.is_finite() || !text.is_finite() || !image.is_finite() {
            return Err(TrainError::DivergedLoss { epoch });
        }
        epoch_losses.push(mean);
    }

    let (eval, split) = match heldout {
        Some(h) if !h.is_empty() => (h, "heldout"),
        _ => (pairs, "train"),
    };
    let report = TrainReport {
        epoch_losses,
        recall_at_1: recall_at_k(&text, &image, eval, 1)?,
        recall_at_5: recall_at_k(&text, &image, eval, 5)?,
        recall_split: split.into(),
        train_pairs: pairs.len(),
        eval_pairs: eval.len(),
        wall_time_secs: None,
    };
    Ok(TrainedRetriever { text, image, report })
}

/// Fraction of text queries whose own image ranks in the top `k` among all
/// images of `pairs` by cosine. Ties are broken by ascending pair index.
pub fn recall_at_k(text: &AdapterParams, image: &AdapterParams, pairs: &[Pair], k: usize) -> Result<f64, TrainError> {
    if k == 0 {
        return Err(TrainError::ZeroK);
    }
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    // Dead-unit outputs stay zero vectors here and score 0 against everything.
    let t: Vec<Embedding> = pairs.iter().map(|p| text.forward_cached(&p.text).map(|c| c.output)).collect::<Result<_, _>>()?;
    let v: Vec<Embedding> = pairs.iter().map(|p| image.forward_cached(&p.image).map(|c| c.output)).collect::<Result<_, _>>()?;
    Ok(recall_from_embeddings(&t, &v, k))
}

/// Recall@k for already-adapted, unit-norm embeddings.
pub fn recall_from_embeddings(text: &[Embedding], image: &[Embedding], k: usize) -> f64 {
    let hits = text
        .iter()
        .enumerate()
        .filter(|(i, q)| {
            let own = q.dot(&image[*i]);
            let rank = image
                .iter()
                .enumerate()
                .filter(|(j, v)| {
                    let s = q.dot(v);
                    s > own || (s == own && j < i)
                })
                .count();
            rank < k
        })
        .count();
    hits as f64 / text.len() as f64
}
