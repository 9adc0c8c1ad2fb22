//! Pipeline stages over files: the command line is a thin layer on top.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use geoicl_core::augment::{assemble_augmented, paraphrase, AugmentError, Paraphraser};
use geoicl_core::compose::{build_meta_dataset, ImageStore, MetaConfig, MetaSample, Provenance};
use geoicl_core::eval::{
    eval_targets, grade_outcome, pair_results, summarize, Backend, BackendError, CopyContext, EvalConfig, EvalContext,
    EvalError, EvalResult, GoldOracle, IclComparison, QueryEmbedder, QueryEncoder, RandomGuess, MAX_NEW_TOKENS,
};
use geoicl_core::featurize::BaseFeaturizerConfig;
use geoicl_core::index::SimilarityIndex;
use geoicl_core::normalize::SymbolTable;
use geoicl_core::record::{Dataset, GeoRecord, Split};
use geoicl_core::train::{train_retriever, TrainReport};
use geoicl_core::Embedding;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, IndexFile, Space, CHECKPOINT_SCHEMA};
use crate::concurrent::map_bounded;
use crate::config::PipelineConfig;
use crate::dataset::{write_atomic, write_json};
use crate::embeddings::{split_pairs, PairLine};
use crate::error::{Error, Result};
use crate::png;

pub const META_SCHEMA: &str = "geoicl.meta.v1";

/// Fill `question_norm` for every record.
pub fn normalize_dataset(dataset: &Dataset, table: &SymbolTable) -> Dataset {
    let records = dataset
        .iter()
        .map(|r| GeoRecord { question_norm: Some(table.normalize(&r.question_raw)), ..r.clone() })
        .collect();
    Dataset::new(records).expect("ids unchanged")
}

pub fn load_table(path: Option<&Path>) -> Result<SymbolTable> {
    match path {
        Some(p) => Ok(SymbolTable::from_tsv(&fs::read_to_string(p).map_err(Error::io(p))?)?),
        None => Ok(SymbolTable::default()),
    }
}

/// Base (pre-adapter) text and image vectors for every record. External
/// vectors, when given, replace the featurizer for their modality.
pub fn base_pairs(
    dataset: &Dataset,
    images: &impl ImageStore,
    featurizer: &BaseFeaturizerConfig,
    external_text: Option<&BTreeMap<String, Embedding>>,
    external_image: Option<&BTreeMap<String, Embedding>>,
) -> Result<Vec<PairLine>> {
    featurizer.validate()?;
    let lookup = |map: &BTreeMap<String, Embedding>, r: &GeoRecord| {
        map.get(&r.id).cloned().ok_or_else(|| Error::UnknownId(r.id.clone()))
    };
    dataset
        .iter()
        .map(|r| {
            let text = match external_text {
                Some(m) => lookup(m, r)?,
                None => featurizer.text.embed(r.question_text())?,
            };
            let image = match external_image {
                Some(m) => lookup(m, r)?,
                None => {
                    let raster = images.load(r).map_err(|reason| Error::Png(format!("{}: {reason}", r.id)))?;
                    featurizer.image.embed(&raster)?
                }
            };
            Ok(PairLine { id: r.id.clone(), split: r.split, text, image })
        })
        .collect()
}

/// Train both towers on the train-split pairs; val pairs give held-out recall.
pub fn train(pairs: &[PairLine], cfg: &PipelineConfig) -> Result<(Checkpoint, TrainReport)> {
    let (train, heldout) = split_pairs(pairs);
    let started = Instant::now();
    let trained = train_retriever(&train, Some(&heldout), &cfg.trainer, &cfg.infonce)?;
    let mut report = trained.report.clone();
    report.wall_time_secs = Some(started.elapsed().as_secs_f64());
    let ckpt = Checkpoint {
        schema: CHECKPOINT_SCHEMA.into(),
        seed: cfg.trainer.seed,
        featurizer: cfg.featurizer.clone(),
        trainer: cfg.trainer.clone(),
        infonce: cfg.infonce,
        text: trained.text,
        image: trained.image,
        report: trained.report,
    };
    Ok((ckpt, report))
}

pub fn write_loss_csv(path: &Path, report: &TrainReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss"])?;
    for (i, l) in report.epoch_losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    write_atomic(path, &finish_csv(w)?)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

/// Retrieval queries: text tower over featurized questions, or over external
/// base vectors when the checkpoint was trained on those.
pub enum Queries<'a> {
    Featurized(QueryEncoder),
    External { tower: &'a geoicl_core::AdapterParams, vectors: &'a BTreeMap<String, Embedding> },
}

impl<'a> Queries<'a> {
    pub fn new(ckpt: &'a Checkpoint, external: Option<&'a BTreeMap<String, Embedding>>) -> Self {
        match external {
            Some(vectors) => Queries::External { tower: &ckpt.text, vectors },
            None => Queries::Featurized(QueryEncoder { featurizer: ckpt.featurizer.text.clone(), tower: ckpt.text.clone() }),
        }
    }
}

impl QueryEmbedder for Queries<'_> {
    fn embed(&self, record: &GeoRecord) -> std::result::Result<Embedding, String> {
        match self {
            Queries::Featurized(q) => q.embed(record),
            Queries::External { tower, vectors } => {
                let base = vectors.get(&record.id).ok_or_else(|| format!("no external vector for `{}`", record.id))?;
                tower.forward(base).map_err(|e| e.to_string())
            }
        }
    }
}

/// Text-space index over the train split, keyed by record id.
pub fn build_index(dataset: &Dataset, queries: &impl QueryEmbedder) -> Result<SimilarityIndex> {
    let entries = dataset
        .iter()
        .filter(|r| r.split == Split::Train)
        .map(|r| {
            queries
                .embed(r)
                .map(|e| (r.id.clone(), e))
                .map_err(|reason| Error::Eval(EvalError::Query { id: r.id.clone(), reason }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityIndex::build(entries)?)
}

/// One line of a meta dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaLine {
    pub schema: String,
    pub prompt: String,
    /// Merged PNG, relative to the meta file's directory.
    pub image_path: String,
    pub target: String,
    pub provenance: Provenance,
}

pub fn build_meta(train_set: &Dataset, index: &SimilarityIndex, images: &impl ImageStore, cfg: &MetaConfig) -> Result<Vec<MetaSample>> {
    Ok(build_meta_dataset(train_set, index, images, cfg)?)
}

/// Write `meta.jsonl` and `images/NNNNNN.png` under `out_dir`.
pub fn write_meta(out_dir: &Path, samples: &[MetaSample]) -> Result<PathBuf> {
    let image_dir = out_dir.join("images");
    fs::create_dir_all(&image_dir).map_err(Error::io(&image_dir))?;
    let mut text = String::new();
    for (i, s) in samples.iter().enumerate() {
        let rel = format!("images/{i:06}.png");
        png::write(&out_dir.join(&rel), &s.merged_image)?;
        let line = MetaLine {
            schema: META_SCHEMA.into(),
            prompt: s.prompt.clone(),
            image_path: rel,
            target: s.target.clone(),
            provenance: s.provenance.clone(),
        };
        text.push_str(&serde_json::to_string(&line)?);
        text.push('\n');
    }
    let path = out_dir.join("meta.jsonl");
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Built-in offline backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mock {
    Gold,
    CopyContext,
    Random,
}

pub fn mock_backend(mock: Mock, dataset: &Dataset, meta: &MetaConfig, seed: u64) -> Box<dyn Backend + Sync> {
    match mock {
        Mock::Gold => Box::new(GoldOracle::new(dataset.iter())),
        Mock::CopyContext => Box::new(CopyContext::new(meta)),
        Mock::Random => Box::new(RandomGuess::new(seed, dataset.iter())),
    }
}

/// Evaluate `split` once, sending up to `concurrency` requests at a time.
/// Items are graded and reported in split order.
pub fn run_eval<S: ImageStore, Q: QueryEmbedder, B: Backend + Sync + ?Sized>(
    name: &str,
    split: &Dataset,
    ctx: &EvalContext<'_, S, Q>,
    backend: &B,
    cfg: &EvalConfig,
    with_icl: bool,
    concurrency: usize,
) -> Result<EvalResult> {
    if cfg.max_new_tokens > MAX_NEW_TOKENS {
        return Err(EvalError::MaxTokens(cfg.max_new_tokens).into());
    }
    let targets = eval_targets(split);
    if targets.is_empty() {
        return Err(EvalError::EmptySplit.into());
    }
    let samples = targets.iter().map(|r| ctx.compose(r, with_icl)).collect::<std::result::Result<Vec<_>, _>>()?;
    let outcomes: Vec<std::result::Result<String, BackendError>> =
        map_bounded(&samples, concurrency, |s| backend.generate(s, cfg.max_new_tokens));
    let items = targets
        .iter()
        .zip(&samples)
        .zip(outcomes)
        .map(|((r, s), o)| grade_outcome(r, s, o, cfg))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(summarize(name, with_icl, ctx.meta.k, items)?)
}

pub fn compare_icl<S: ImageStore, Q: QueryEmbedder, B: Backend + Sync + ?Sized>(
    name: &str,
    split: &Dataset,
    ctx: &EvalContext<'_, S, Q>,
    backend: &B,
    cfg: &EvalConfig,
    concurrency: usize,
) -> Result<IclComparison> {
    let without = run_eval(name, split, ctx, backend, cfg, false, concurrency)?;
    let with = run_eval(name, split, ctx, backend, cfg, true, concurrency)?;
    Ok(pair_results(without, with))
}

pub fn eval_csv(result: &EvalResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "qtype", "status", "correct", "predicted", "gold", "context_ids"])?;
    for i in &result.items {
        let status = serde_json::to_value(i.status)?;
        w.write_record([
            i.id.as_str(),
            i.qtype.as_str(),
            status.as_str().unwrap_or_default(),
            if i.correct { "1" } else { "0" },
            i.predicted.as_deref().unwrap_or(""),
            i.gold.as_str(),
            &i.context_ids.join(";"),
        ])?;
    }
    finish_csv(w)
}

/// Write `{stem}.json`, `{stem}.csv` and `{stem}.txt` next to `json_path`.
pub fn write_eval(json_path: &Path, result: &EvalResult) -> Result<()> {
    write_json(json_path, result)?;
    write_atomic(&json_path.with_extension("csv"), &eval_csv(result)?)?;
    write_atomic(&json_path.with_extension("txt"), result.render_table().as_bytes())
}

pub fn write_comparison(json_path: &Path, cmp: &IclComparison) -> Result<()> {
    write_json(json_path, cmp)?;
    let stem = json_path.with_extension("");
    let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    write_atomic(&stem.with_file_name(format!("{name}.without_icl.csv")), &eval_csv(&cmp.without_icl)?)?;
    write_atomic(&stem.with_file_name(format!("{name}.with_icl.csv")), &eval_csv(&cmp.with_icl)?)?;
    write_atomic(&json_path.with_extension("txt"), cmp.render_table().as_bytes())
}

/// Paraphrase every record `n` ways with bounded concurrency, then
/// interleave originals and variants.
pub fn augment<P: Paraphraser + Sync>(dataset: &Dataset, n: usize, client: &P, concurrency: usize) -> Result<Dataset> {
    let variants = map_bounded(dataset.records(), concurrency, |r| {
        paraphrase(&r.question_raw, n, r.language, client)
            .map_err(|e| AugmentError::Record { id: r.id.clone(), source: Box::new(e) })
    })
    .into_iter()
    .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(assemble_augmented(dataset, variants)?)
}

/// Paths written by [`run_all`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutputs {
    pub dataset: PathBuf,
    pub pairs: PathBuf,
    pub checkpoint: PathBuf,
    pub index: PathBuf,
    pub meta: PathBuf,
    pub comparison: PathBuf,
}

/// Every offline stage in order: augment (stub paraphraser), normalize,
/// featurize, train, index, meta dataset, and a with/without ICL comparison
/// on the test split against `mock`.
pub fn run_all(
    dataset: &Dataset,
    images: &(impl ImageStore + Sync),
    cfg: &PipelineConfig,
    mock: Mock,
    out_dir: &Path,
) -> Result<RunOutputs> {
    fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let stub = geoicl_core::augment::StubParaphraser;
    let augmented = augment(dataset, cfg.augment.variants, &stub, cfg.backend.concurrency)?;
    let table = load_table(cfg.paths.normalizer_table.as_deref())?;
    let normalized = normalize_dataset(&augmented, &table);
    let dataset_path = out_dir.join("dataset.jsonl");
    crate::dataset::write_dataset(&dataset_path, &normalized)?;

    let pairs = base_pairs(&normalized, images, &cfg.featurizer, None, None)?;
    let pairs_path = out_dir.join("pairs.jsonl");
    crate::embeddings::write_pairs(&pairs_path, &pairs)?;

    let (ckpt, _) = train(&pairs, cfg)?;
    let ckpt_path = out_dir.join("checkpoint.json");
    ckpt.save(&ckpt_path)?;

    let queries = Queries::new(&ckpt, None);
    let index = build_index(&normalized, &queries)?;
    let index_path = out_dir.join("index.json");
    IndexFile::new(Space::Text, index.clone()).save(&index_path)?;

    let train_set = normalized.filter_split(Split::Train);
    let samples = build_meta(&train_set, &index, images, &cfg.meta)?;
    let meta_path = write_meta(&out_dir.join("meta"), &samples)?;

    let test = normalized.filter_split(Split::Test);
    let backend = mock_backend(mock, &normalized, &cfg.meta, cfg.backend.mock_seed);
    let ctx = EvalContext { train_set: &train_set, index: &index, images, queries: &queries, meta: &cfg.meta };
    let cmp = compare_icl("test", &test, &ctx, backend.as_ref(), &cfg.eval, cfg.backend.concurrency)?;
    let cmp_path = out_dir.join("compare.json");
    write_comparison(&cmp_path, &cmp)?;

    Ok(RunOutputs { dataset: dataset_path, pairs: pairs_path, checkpoint: ckpt_path, index: index_path, meta: meta_path, comparison: cmp_path })
}
