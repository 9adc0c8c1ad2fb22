//! Evaluation harness: compose prompts for a split, query a backend, grade,
//! and report accuracy with and without in-context exemplars.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{AdapterError, AdapterParams, Embedding};
use crate::compose::{compose_inference_prompt, target_text, ComposeError, ImageStore, MetaConfig, MetaSample};
use crate::featurize::{FeaturizeError, TextFeaturizer};
use crate::grade::{grade, Grade, DEFAULT_REL_TOL};
use crate::index::SimilarityIndex;
use crate::record::{choice_letter, Dataset, GeoRecord, QuestionType};
use crate::stats::{sign_test_p, wilson_interval};

pub const EVAL_SCHEMA: &str = "geoicl.eval.v1";
pub const COMPARE_SCHEMA: &str = "geoicl.compare.v1";
/// Upper bound on generated tokens per request.
pub const MAX_NEW_TOKENS: u32 = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("split has no gradable records")]
    EmptySplit,
    #[error("backend unavailable for `{id}`: {reason}")]
    BackendUnavailable { id: String, reason: String },
    #[error("max_new_tokens {0} exceeds {MAX_NEW_TOKENS}")]
    MaxTokens(u32),
    #[error("query embedding for `{id}`: {reason}")]
    Query { id: String, reason: String },
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct BackendError(pub String);

/// A multimodal model that continues a composed prompt.
pub trait Backend {
    fn generate(&self, sample: &MetaSample, max_new_tokens: u32) -> Result<String, BackendError>;
}

/// Produces the retrieval query embedding for a record.
pub trait QueryEmbedder {
    fn embed(&self, record: &GeoRecord) -> Result<Embedding, String>;
}

/// Text featurizer followed by the trained text tower.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEncoder {
    pub featurizer: TextFeaturizer,
    pub tower: AdapterParams,
}

impl QueryEncoder {
    pub fn encode_text(&self, text: &str) -> Result<Embedding, String> {
        let base = self.featurizer.embed(text).map_err(|e: FeaturizeError| e.to_string())?;
        self.tower.forward(&base).map_err(|e: AdapterError| e.to_string())
    }
}

impl QueryEmbedder for QueryEncoder {
    fn embed(&self, record: &GeoRecord) -> Result<Embedding, String> {
        self.encode_text(record.question_text())
    }
}

impl QueryEmbedder for BTreeMap<String, Embedding> {
    fn embed(&self, record: &GeoRecord) -> Result<Embedding, String> {
        self.get(&record.id).cloned().ok_or_else(|| String::from("no embedding"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub max_new_tokens: u32,
    pub cloze_rel_tol: f64,
    /// Grade proving questions by exact match against the target text.
    pub grade_proving: bool,
    /// Record backend failures per item instead of aborting.
    pub lenient: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { max_new_tokens: MAX_NEW_TOKENS, cloze_rel_tol: DEFAULT_REL_TOL, grade_proving: false, lenient: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Correct,
    Incorrect,
    NoAnswer,
    Error,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub qtype: QuestionType,
    pub predicted: Option<String>,
    pub gold: String,
    pub correct: bool,
    pub status: ItemStatus,
    pub context_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub schema: String,
    pub dataset: String,
    pub icl: bool,
    pub k: usize,
    /// Graded items; excludes synthetic and unsupported records.
    pub n_total: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub ci95: (f64, f64),
    pub n_no_answer: usize,
    pub n_errors: usize,
    pub n_unsupported: usize,
    pub items: Vec<ItemRecord>,
}

impl EvalResult {
    pub fn render_table(&self) -> String {
        let label = if self.icl { "with ICL" } else { "w/o ICL" };
        format!(
            "{:<10} | {} (%)\n{:-<10}-+-{:-<w$}\n{:<10} | {:.2} [{:.2}, {:.2}] ({}/{})\n",
            "Setting",
            self.dataset,
            "",
            "",
            label,
            100.0 * self.accuracy,
            100.0 * self.ci95.0,
            100.0 * self.ci95.1,
            self.n_correct,
            self.n_total,
            w = self.dataset.len() + 4,
        )
    }
}

/// Paired runs without and with in-context exemplars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclComparison {
    pub schema: String,
    pub without_icl: EvalResult,
    pub with_icl: EvalResult,
    /// Accuracy with ICL minus accuracy without, in `[−1, 1]`.
    pub delta: f64,
    /// Items correct only with ICL.
    pub gained: usize,
    /// Items correct only without ICL.
    pub lost: usize,
    /// One-sided exact sign test on the discordant items.
    pub p_value: f64,
}

impl IclComparison {
    pub fn render_table(&self) -> String {
        let name = &self.with_icl.dataset;
        let w = name.len().max(8) + 5;
        format!(
            "{:<8} | {:<w$}\n{:-<8}-+-{:-<w$}\n{:<8} | {:<w$}\n{:<8} | {:<w$}\np (sign test, one-sided) = {:.3e}\n",
            "Setting",
            format!("{name} (%)"),
            "",
            "",
            "w/o ICL",
            format!("{:.2}", 100.0 * self.without_icl.accuracy),
            "with ICL",
            format!("{:.2} ({:+.2})", 100.0 * self.with_icl.accuracy, 100.0 * self.delta),
            self.p_value,
        )
    }
}

/// Records evaluated from a split, in split order: non-synthetic ones.
pub fn eval_targets(split: &Dataset) -> Vec<&GeoRecord> {
    split.iter().filter(|r| !r.synthetic).collect()
}

/// Everything needed to compose prompts for evaluation targets.
pub struct EvalContext<'a, S: ImageStore, Q: QueryEmbedder> {
    pub train_set: &'a Dataset,
    pub index: &'a SimilarityIndex,
    pub images: &'a S,
    pub queries: &'a Q,
    pub meta: &'a MetaConfig,
}

impl<S: ImageStore, Q: QueryEmbedder> EvalContext<'_, S, Q> {
    pub fn compose(&self, target: &GeoRecord, with_icl: bool) -> Result<MetaSample, EvalError> {
        let query = if with_icl && self.meta.k > 0 {
            self.queries.embed(target).map_err(|reason| EvalError::Query { id: target.id.clone(), reason })?
        } else {
            // Zero-shot prompts do not consult the index.
            Embedding::new(alloc::vec![1.0; self.index.dim().max(1)])
        };
        Ok(compose_inference_prompt(target, &query, self.index, self.train_set, self.images, self.meta, with_icl)?)
    }
}

fn gold_string(r: &GeoRecord) -> String {
    match r.qtype {
        QuestionType::Proving => target_text(r),
        _ => r.answer.render(),
    }
}

/// Grade one backend outcome for `record`.
pub fn grade_outcome(
    record: &GeoRecord,
    sample: &MetaSample,
    outcome: Result<String, BackendError>,
    cfg: &EvalConfig,
) -> Result<ItemRecord, EvalError> {
    let mut item = ItemRecord {
        id: record.id.clone(),
        qtype: record.qtype,
        predicted: None,
        gold: gold_string(record),
        correct: false,
        status: ItemStatus::Unsupported,
        context_ids: sample.provenance.context_ids.clone(),
    };
    let text = match outcome {
        Ok(text) => text,
        Err(e) if cfg.lenient => {
            log::warn!("backend failed for {}: {}", record.id, e.0);
            item.status = ItemStatus::Error;
            item.predicted = Some(format!("error: {}", e.0));
            return Ok(item);
        }
        Err(e) => return Err(EvalError::BackendUnavailable { id: record.id.clone(), reason: e.0 }),
    };
    let proving_target = cfg.grade_proving.then(|| target_text(record));
    let render = |a: &crate::record::AnswerValue| match (record.qtype, a) {
        (QuestionType::Selection, crate::record::AnswerValue::Choice(i)) => choice_letter(*i).to_string(),
        _ => a.render(),
    };
    match grade(record, &text, cfg.cloze_rel_tol, proving_target.as_deref()) {
        Grade::Correct(a) => {
            item.predicted = Some(render(&a));
            item.correct = true;
            item.status = ItemStatus::Correct;
        }
        Grade::Incorrect(a) => {
            item.predicted = Some(render(&a));
            item.status = ItemStatus::Incorrect;
        }
        Grade::NoAnswer => {
            log::debug!("no answer found for {}", record.id);
            item.status = ItemStatus::NoAnswer;
        }
        Grade::Unsupported => {}
    }
    Ok(item)
}

/// Fold graded items into a result. Items keep the given order.
pub fn summarize(dataset: &str, icl: bool, k: usize, items: Vec<ItemRecord>) -> Result<EvalResult, EvalError> {
    let graded = |s: ItemStatus| s != ItemStatus::Unsupported;
    let n_total = items.iter().filter(|i| graded(i.status)).count();
    if n_total == 0 {
        return Err(EvalError::EmptySplit);
    }
    let count = |s: ItemStatus| items.iter().filter(|i| i.status == s).count();
    let n_correct = count(ItemStatus::Correct);
    Ok(EvalResult {
        schema: EVAL_SCHEMA.into(),
        dataset: dataset.into(),
        icl,
        k: if icl { k } else { 0 },
        n_total,
        n_correct,
        accuracy: n_correct as f64 / n_total as f64,
        ci95: wilson_interval(n_correct, n_total, 1.96),
        n_no_answer: count(ItemStatus::NoAnswer),
        n_errors: count(ItemStatus::Error),
        n_unsupported: count(ItemStatus::Unsupported),
        items,
    })
}

/// Evaluate every non-synthetic record of `split` once, sequentially.
pub fn run_eval<S: ImageStore, Q: QueryEmbedder>(
    dataset: &str,
    split: &Dataset,
    ctx: &EvalContext<'_, S, Q>,
    backend: &impl Backend,
    cfg: &EvalConfig,
    with_icl: bool,
) -> Result<EvalResult, EvalError> {
    if cfg.max_new_tokens > MAX_NEW_TOKENS {
        return Err(EvalError::MaxTokens(cfg.max_new_tokens));
    }
    let targets = eval_targets(split);
    if targets.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let mut items = Vec::with_capacity(targets.len());
    for r in targets {
        let sample = ctx.compose(r, with_icl)?;
        let outcome = backend.generate(&sample, cfg.max_new_tokens);
        items.push(grade_outcome(r, &sample, outcome, cfg)?);
    }
    summarize(dataset, with_icl, ctx.meta.k, items)
}

/// Pair two results over the same items.
pub fn pair_results(without_icl: EvalResult, with_icl: EvalResult) -> IclComparison {
    let before: BTreeMap<&str, bool> = without_icl.items.iter().map(|i| (i.id.as_str(), i.correct)).collect();
    let (mut gained, mut lost) = (0, 0);
    for item in &with_icl.items {
        match (before.get(item.id.as_str()), item.correct) {
            (Some(false), true) => gained += 1,
            (Some(true), false) => lost += 1,
            _ => {}
        }
    }
    IclComparison {
        schema: COMPARE_SCHEMA.into(),
        delta: with_icl.accuracy - without_icl.accuracy,
        gained,
        lost,
        p_value: sign_test_p(gained, lost),
        without_icl,
        with_icl,
    }
}

/// Run the split without and then with in-context exemplars.
pub fn compare_icl<S: ImageStore, Q: QueryEmbedder>(
    dataset: &str,
    split: &Dataset,
    ctx: &EvalContext<'_, S, Q>,
    backend: &impl Backend,
    cfg: &EvalConfig,
) -> Result<IclComparison, EvalError> {
    let without = run_eval(dataset, split, ctx, backend, cfg, false)?;
    let with = run_eval(dataset, split, ctx, backend, cfg, true)?;
    Ok(pair_results(without, with))
}

/// Answers every prompt with its target's gold completion.
#[derive(Debug, Clone, Default)]
pub struct GoldOracle {
    completions: BTreeMap<String, String>,
}

impl GoldOracle {
    pub fn new<'a>(records: impl IntoIterator<Item = &'a GeoRecord>) -> Self {
        Self { completions: records.into_iter().map(|r| (r.id.clone(), target_text(r))).collect() }
    }
}

impl Backend for GoldOracle {
    fn generate(&self, sample: &MetaSample, _: u32) -> Result<String, BackendError> {
        self.completions
            .get(&sample.provenance.target_id)
            .cloned()
            .ok_or_else(|| BackendError(format!("unknown target `{}`", sample.provenance.target_id)))
    }
}

/// Repeats the answer of the first (most similar) exemplar in the prompt.
#[derive(Debug, Clone, Default)]
pub struct CopyContext {
    pub answer_prefix: String,
}

impl CopyContext {
    pub fn new(meta: &MetaConfig) -> Self {
        Self { answer_prefix: meta.template.answer_prefix.clone() }
    }

    pub fn first_exemplar_answer<'p>(&self, prompt: &'p str) -> Option<&'p str> {
        prompt
            .lines()
            .filter_map(|l| l.strip_prefix(self.answer_prefix.as_str()))
            .map(str::trim)
            .find(|a| !a.is_empty())
    }
}

impl Backend for CopyContext {
    fn generate(&self, sample: &MetaSample, _: u32) -> Result<String, BackendError> {
        Ok(match self.first_exemplar_answer(&sample.prompt) {
            Some(a) => format!("The answer is {a}."),
            None => "I cannot determine.".into(),
        })
    }
}

/// Guesses uniformly among the target's choices (or a small integer for
/// cloze), seeded by the prompt text so repeated prompts get equal guesses.
#[derive(Debug, Clone, Default)]
pub struct RandomGuess {
    pub seed: u64,
    choices: BTreeMap<String, usize>,
}

impl RandomGuess {
    pub fn new<'a>(seed: u64, records: impl IntoIterator<Item = &'a GeoRecord>) -> Self {
        Self { seed, choices: records.into_iter().map(|r| (r.id.clone(), r.choices.len())).collect() }
    }

    fn hash(&self, text: &str) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // splitmix finalizer
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^ (h >> 31)
    }
}

impl Backend for RandomGuess {
    fn generate(&self, sample: &MetaSample, _: u32) -> Result<String, BackendError> {
        let h = self.hash(&sample.prompt);
        let n = self.choices.get(&sample.provenance.target_id).copied().unwrap_or(0);
        Ok(if n > 0 {
            format!("The answer is {}.", choice_letter((h % n as u64) as usize))
        } else {
            format!("The answer is {}.", h % 21)
        })
    }
}
