//! Composition of meta-training and in-context inference samples.
//!
//! A sample is one prompt holding `K` retrieved exemplars (question, worked
//! steps, answer) followed by the target question, plus one raster stacking
//! the exemplar diagrams above the target diagram. Exemplars always come from
//! the train split and never include the target or its paraphrases.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::Embedding;
use crate::image::{merge_vertical, ImageError, ImageRaster};
use crate::index::{IndexError, QueryOptions, SimilarityIndex};
use crate::record::{choice_letter, source_id, Dataset, GeoRecord, QuestionType, Split};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error("target `{0}` appears in its own context")]
    SelfInContext(String),
    #[error("context record `{id}` is from the {split} split")]
    TestLeak { id: String, split: Split },
    #[error("expected {expected} context records, got {got}")]
    ContextLength { expected: usize, got: usize },
    #[error("only {found} of {needed} context records available for `{id}`")]
    InsufficientContext { id: String, needed: usize, found: usize },
    #[error("no embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("image for `{id}`: {reason}")]
    Image { id: String, reason: String },
    #[error("fan-out must be at least 1")]
    FanOut,
    #[error(transparent)]
    Merge(#[from] ImageError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Text layout of prompts. The image token appears once, at the top, standing
/// for the single merged raster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplate {
    pub image_token: String,
    pub question_prefix: String,
    pub choices_prefix: String,
    pub solution_prefix: String,
    pub answer_prefix: String,
    pub block_separator: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            image_token: "<image>".into(),
            question_prefix: "Question: ".into(),
            choices_prefix: "Choices: ".into(),
            solution_prefix: "Solution: ".into(),
            answer_prefix: "Answer:".into(),
            block_separator: "\n\n".into(),
        }
    }
}

impl PromptTemplate {
    fn question_block(&self, r: &GeoRecord, out: &mut String) {
        out.push_str(&self.question_prefix);
        out.push_str(r.question_text());
        out.push('\n');
        if !r.choices.is_empty() {
            out.push_str(&self.choices_prefix);
            let opts: Vec<String> =
                r.choices.iter().enumerate().map(|(i, c)| format!("{}. {}", choice_letter(i), c)).collect();
            out.push_str(&opts.join("  "));
            out.push('\n');
        }
    }

    /// Exemplar block: question, optional worked steps, answer.
    pub fn render_exemplar(&self, r: &GeoRecord, include_steps: bool) -> String {
        let mut out = String::new();
        self.question_block(r, &mut out);
        if include_steps && !r.solution_steps.is_empty() {
            out.push_str(&self.solution_prefix);
            out.push_str(&r.solution_steps.join(" "));
            out.push('\n');
        }
        out.push_str(&self.answer_prefix);
        out.push(' ');
        out.push_str(&r.answer.render());
        out.push_str(&self.block_separator);
        out
    }

    /// Target block, ending right after the answer prefix.
    pub fn render_target(&self, r: &GeoRecord) -> String {
        let mut out = String::new();
        self.question_block(r, &mut out);
        out.push_str(&self.answer_prefix);
        out
    }

    pub fn render(&self, context: &[&GeoRecord], target: &GeoRecord, include_steps: bool) -> String {
        let mut out = String::new();
        out.push_str(&self.image_token);
        out.push('\n');
        for r in context {
            out.push_str(&self.render_exemplar(r, include_steps));
        }
        out.push_str(&self.render_target(target));
        out
    }

    /// Number of lines opening a question block.
    pub fn count_question_blocks(&self, prompt: &str) -> usize {
        prompt.lines().filter(|l| l.starts_with(self.question_prefix.as_str())).count()
    }
}

/// Completion a model should produce for `r`: worked steps then the answer.
pub fn target_text(r: &GeoRecord) -> String {
    let steps = r.solution_steps.join(" ");
    let answer = r.answer.render();
    match r.qtype {
        QuestionType::Caption => answer,
        QuestionType::Proving if answer.is_empty() => steps,
        _ if steps.is_empty() => format!("The answer is {answer}."),
        _ => format!("{steps} The answer is {answer}."),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    /// Exemplars per sample. `0` gives zero-shot samples.
    pub k: usize,
    /// Samples per target built from consecutive groups of `k` neighbors.
    /// `1` yields one sample per record; `5` with `k = 1` gives five
    /// single-exemplar samples from the top five neighbors.
    pub fan_out: usize,
    pub template: PromptTemplate,
    pub pad_value: u8,
    pub include_steps: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self { k: 1, fan_out: 5, template: PromptTemplate::default(), pad_value: 255, include_steps: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub context_ids: Vec<String>,
    pub target_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaSample {
    pub prompt: String,
    pub merged_image: ImageRaster,
    pub target: String,
    pub provenance: Provenance,
}

/// Source of decoded diagrams for records.
pub trait ImageStore {
    fn load(&self, record: &GeoRecord) -> Result<ImageRaster, String>;
}

/// In-memory store keyed by record id; paraphrase variants fall back to their
/// source record's raster.
impl ImageStore for BTreeMap<String, ImageRaster> {
    fn load(&self, record: &GeoRecord) -> Result<ImageRaster, String> {
        self.get(&record.id)
            .or_else(|| self.get(record.source_id()))
            .cloned()
            .ok_or_else(|| String::from("not in store"))
    }
}

fn load_image(images: &impl ImageStore, r: &GeoRecord) -> Result<ImageRaster, ComposeError> {
    images.load(r).map_err(|reason| ComposeError::Image { id: r.id.clone(), reason })
}

/// Build one sample from an explicit, ordered context.
pub fn compose_sample(
    target: &GeoRecord,
    context: &[&GeoRecord],
    images: &impl ImageStore,
    cfg: &MetaConfig,
) -> Result<MetaSample, ComposeError> {
    if context.len() != cfg.k {
        return Err(ComposeError::ContextLength { expected: cfg.k, got: context.len() });
    }
    for c in context {
        if c.id == target.id {
            return Err(ComposeError::SelfInContext(target.id.clone()));
        }
        if c.split != Split::Train {
            return Err(ComposeError::TestLeak { id: c.id.clone(), split: c.split });
        }
    }
    let mut rasters = Vec::with_capacity(context.len() + 1);
    for r in context.iter().copied().chain(core::iter::once(target)) {
        rasters.push(load_image(images, r)?);
    }
    let refs: Vec<&ImageRaster> = rasters.iter().collect();
    let merged_image = merge_vertical(&refs, cfg.pad_value)?;
    Ok(MetaSample {
        prompt: cfg.template.render(context, target, cfg.include_steps),
        merged_image,
        target: target_text(target),
        provenance: Provenance {
            context_ids: context.iter().map(|r| r.id.clone()).collect(),
            target_id: target.id.clone(),
        },
    })
}

/// Up to `n` train-split records from `pool` most similar to `query`, skipping
/// the target and any record sharing its source id.
pub fn select_context<'a>(
    index: &SimilarityIndex,
    query: &Embedding,
    target: &GeoRecord,
    pool: &'a Dataset,
    n: usize,
) -> Result<Vec<&'a GeoRecord>, ComposeError> {
    if n == 0 || index.is_empty() {
        return Ok(Vec::new());
    }
    let target_source = target.source_id();
    let mut want = (n + 8).min(index.len());
    loop {
        let hits = index.top_k(query, want, QueryOptions::default())?;
        let picked: Vec<&GeoRecord> = hits
            .iter()
            .filter(|h| h.id != target.id && source_id(&h.id) != target_source)
            .filter_map(|h| pool.get(&h.id))
            .filter(|r| r.split == Split::Train)
            .take(n)
            .collect();
        if picked.len() == n || want == index.len() {
            return Ok(picked);
        }
        want = (want * 4).min(index.len());
    }
}

/// One sample per (train record, fan-out group), ordered by target id.
/// `index` must hold text-tower embeddings keyed by record id.
pub fn build_meta_dataset(
    train_set: &Dataset,
    index: &SimilarityIndex,
    images: &impl ImageStore,
    cfg: &MetaConfig,
) -> Result<Vec<MetaSample>, ComposeError> {
    if cfg.fan_out == 0 {
        return Err(ComposeError::FanOut);
    }
    let mut targets: Vec<&GeoRecord> = train_set.iter().filter(|r| r.split == Split::Train).collect();
    targets.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::with_capacity(targets.len() * cfg.fan_out);
    for target in targets {
        if cfg.k == 0 {
            out.push(compose_sample(target, &[], images, cfg)?);
            continue;
        }
        let query = index.row(&target.id).ok_or_else(|| ComposeError::MissingEmbedding(target.id.clone()))?;
        let context = select_context(index, &query, target, train_set, cfg.k * cfg.fan_out)?;
        if context.len() < cfg.k {
            return Err(ComposeError::InsufficientContext { id: target.id.clone(), needed: cfg.k, found: context.len() });
        }
        for group in context.chunks_exact(cfg.k) {
            out.push(compose_sample(target, group, images, cfg)?);
        }
    }
    Ok(out)
}

/// Compose the prompt sent to a model for `target`. Without ICL the prompt
/// holds only the target block; with ICL it is built exactly as in
/// meta-training (first fan-out group).
pub fn compose_inference_prompt(
    target: &GeoRecord,
    query: &Embedding,
    index: &SimilarityIndex,
    train_set: &Dataset,
    images: &impl ImageStore,
    cfg: &MetaConfig,
    with_icl: bool,
) -> Result<MetaSample, ComposeError> {
    let k = if with_icl { cfg.k } else { 0 };
    let context = select_context(index, query, target, train_set, k)?;
    if context.len() < k {
        return Err(ComposeError::InsufficientContext { id: target.id.clone(), needed: k, found: context.len() });
    }
    if k == cfg.k {
        compose_sample(target, &context, images, cfg)
    } else {
        let zero_shot = MetaConfig { k: 0, ..cfg.clone() };
        compose_sample(target, &context, images, &zero_shot)
    }
}
