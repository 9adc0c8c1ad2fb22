use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geoicl_core::augment::StubParaphraser;
use geoicl_core::eval::{Backend, EvalContext};
use geoicl_core::finetune::FinetuneConfig;
use geoicl_core::index::QueryOptions;
use geoicl_core::record::{Dataset, Split};
use geoicl_core::Embedding;
use geoicl::checkpoint::{Checkpoint, IndexFile, Space};
use geoicl::config::PipelineConfig;
use geoicl::dataset::{self, LoadOptions, DATASET_SCHEMA};
use geoicl::embeddings::{self, PairLine};
use geoicl::http::{HttpBackend, HttpParaphraser};
use geoicl::pipeline::{self, Mock, Queries};
use geoicl::png::DiskImages;
use geoicl::synth::{self, SynthConfig};
use geoicl::{Error, Result};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "geoicl", version, about = "Retrieval-augmented in-context learning pipeline for geometry QA")]
struct Cli {
    /// Pipeline config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Validate inputs and compute results without writing any file.
    #[arg(long, global = true)]
    dry_run: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset file (JSON lines).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Root for relative image paths (default: the dataset's directory).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Skip malformed records instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MockArg {
    Gold,
    CopyContext,
    Random,
}

impl From<MockArg> for Mock {
    fn from(m: MockArg) -> Self {
        match m {
            MockArg::Gold => Mock::Gold,
            MockArg::CopyContext => Mock::CopyContext,
            MockArg::Random => Mock::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Split to evaluate.
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// External base text vectors used instead of the featurizer.
    #[arg(long)]
    text_embeddings: Option<PathBuf>,
    /// Offline backend instead of the configured HTTP backend.
    #[arg(long, value_enum)]
    mock: Option<MockArg>,
    /// Exemplars per prompt (overrides config).
    #[arg(long)]
    k: Option<usize>,
    /// Record backend failures per item and continue.
    #[arg(long)]
    lenient_backend: bool,
    /// Result JSON; CSV and text table are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, validate and rewrite a dataset in canonical form.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = DATASET_SCHEMA)]
        schema: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rewrite math symbols into words and report unmapped symbols.
    Normalize {
        #[command(flatten)]
        data: DataArgs,
        /// Two-column TSV symbol table replacing the default.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per source, question type and split counts.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        /// Print the plain text table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Base text and image vectors for every record (training pairs file).
    Embed {
        #[command(flatten)]
        data: DataArgs,
        /// Project through trained towers instead of writing base vectors.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        text_embeddings: Option<PathBuf>,
        #[arg(long)]
        image_embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the two adapter towers with InfoNCE.
    TrainRetriever {
        /// Pairs file written by `embed`.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        temp: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Checkpoint path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Loss curve CSV (default: next to the checkpoint).
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Text-space similarity index over the train split.
    BuildIndex {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        text_embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest neighbors of an indexed record.
    Query {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        id: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Meta-training samples: retrieved exemplars, prompt and merged image.
    BuildMeta {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        fan_out: Option<usize>,
        /// Output directory for meta.jsonl and merged images.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paraphrase augmentation: n variants per record.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        n: Option<usize>,
        /// Offline rule-based paraphraser instead of the configured service.
        #[arg(long)]
        stub: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one split with or without in-context exemplars.
    Eval {
        #[command(flatten)]
        eval: EvalArgs,
        /// Zero-shot prompts.
        #[arg(long)]
        no_icl: bool,
    },
    /// Evaluate without and with in-context exemplars and report the delta.
    CompareIcl {
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Write the fine-tuning hyperparameters for an external trainer.
    EmitFinetuneConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset with known neighbor structure.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        train_per_family: Option<usize>,
        #[arg(long)]
        test_per_family: Option<usize>,
        /// Plant a disagreeing answer on every n-th selection test record.
        #[arg(long)]
        disagree_every: Option<usize>,
    },
    /// Every offline stage end to end with a mock backend.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "copy-context")]
        mock: MockArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Ctx {
    cfg: PipelineConfig,
    dry_run: bool,
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone()).ok_or_else(|| Error::Config(format!("--{name} is required (or set paths.{name} in the config)")))
}

impl Ctx {
    fn load(&self, args: &DataArgs) -> Result<dataset::Loaded> {
        let path = required(args.data.clone(), &self.cfg.paths.data, "data")?;
        let opts = LoadOptions { lenient: args.lenient, image_root: self.image_root(args), skip_image_check: false };
        dataset::load_dataset(&path, DATASET_SCHEMA, &opts)
    }

    fn image_root(&self, args: &DataArgs) -> Option<PathBuf> {
        args.images.clone().or_else(|| self.cfg.paths.images.clone())
    }

    fn images(&self, loaded: &dataset::Loaded) -> DiskImages {
        DiskImages::new(&loaded.image_root, Some(self.cfg.image_channels))
    }

    fn dataset_name(&self, args: &DataArgs) -> String {
        args.data
            .clone()
            .or_else(|| self.cfg.paths.data.clone())
            .and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "dataset".into())
    }

    /// Relative image paths in a dataset written elsewhere resolve against
    /// its new directory unless an image root is configured.
    fn warn_if_moved(&self, args: &DataArgs, loaded: &dataset::Loaded, out: &Path) {
        let out_dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
        if self.image_root(args).is_none() && out_dir != loaded.image_root {
            log::warn!(
                "{} is written outside {}; pass --images {} (or set paths.images) when loading it",
                out.display(),
                loaded.image_root.display(),
                loaded.image_root.display()
            );
        }
    }

    fn write(&self, what: impl FnOnce() -> Result<()>) -> Result<()> {
        if self.dry_run {
            Ok(())
        } else {
            what()
        }
    }

    fn external(&self, path: &Option<PathBuf>, known: &Dataset) -> Result<Option<BTreeMap<String, Embedding>>> {
        path.as_deref().map(|p| embeddings::import_external_embeddings(p, Some(known))).transpose()
    }
}

/// Print to stdout. A closed pipe (`| head`) is not an error.
fn emit(value: Value) {
    let text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn out_or(path: Option<PathBuf>, dir: &Option<PathBuf>, file: &str) -> Option<PathBuf> {
    path.or_else(|| dir.as_ref().map(|d| d.join(file)))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    let ctx = Ctx { cfg, dry_run: cli.dry_run };
    let dry = ctx.dry_run;
    let out_dir = ctx.cfg.paths.out_dir.clone();

    match cli.command {
        Command::Ingest { data, schema, out } => {
            let path = required(data.data.clone(), &ctx.cfg.paths.data, "data")?;
            let opts = LoadOptions { lenient: data.lenient, image_root: ctx.image_root(&data), skip_image_check: false };
            let loaded = dataset::load_dataset(&path, &schema, &opts)?;
            let out = out_or(out, &out_dir, "dataset.jsonl");
            if let Some(o) = &out {
                ctx.warn_if_moved(&data, &loaded, o);
                ctx.write(|| dataset::write_dataset(o, &loaded.dataset))?;
            }
            emit(json!({
                "schema": "geoicl.ingest.v1",
                "records": loaded.dataset.len(),
                "skipped": loaded.skipped,
                "out": out,
                "dry_run": dry,
            }));
        }
        Command::Normalize { data, table, out } => {
            let loaded = ctx.load(&data)?;
            let table = pipeline::load_table(table.as_deref().or(ctx.cfg.paths.normalizer_table.as_deref()))?;
            let unmapped: Vec<Value> = table
                .audit_vocabulary(loaded.dataset.iter())
                .into_iter()
                .map(|(c, n)| json!({ "symbol": c.to_string(), "count": n }))
                .collect();
            let normalized = pipeline::normalize_dataset(&loaded.dataset, &table);
            let changed = normalized.iter().filter(|r| r.question_norm.as_deref() != Some(r.question_raw.as_str())).count();
            let out = out_or(out, &out_dir, "normalized.jsonl");
            if let Some(o) = &out {
                ctx.warn_if_moved(&data, &loaded, o);
                ctx.write(|| dataset::write_dataset(o, &normalized))?;
            }
            emit(json!({
                "schema": "geoicl.normalize.v1",
                "records": normalized.len(),
                "changed": changed,
                "unmapped": unmapped,
                "out": out,
                "dry_run": dry,
            }));
        }
        Command::Stats { data, table } => {
            let loaded = ctx.load(&data)?;
            let stats = loaded.dataset.compute_stats();
            if table {
                let _ = write!(io::stdout().lock(), "{}", stats.render_table());
            } else {
                emit(json!({
                    "schema": "geoicl.stats.v1",
                    "total": stats.total(),
                    "image_text_pairs": stats.image_text_pairs(),
                    "entries": stats.entries(),
                    "table": stats.render_table(),
                }));
            }
        }
        Command::Embed { data, checkpoint, text_embeddings, image_embeddings, out } => {
            let loaded = ctx.load(&data)?;
            let images = ctx.images(&loaded);
            let ext_text = ctx.external(&text_embeddings, &loaded.dataset)?;
            let ext_image = ctx.external(&image_embeddings, &loaded.dataset)?;
            let featurizer = match &checkpoint {
                Some(p) => Checkpoint::load(p)?.featurizer,
                None => ctx.cfg.featurizer.clone(),
            };
            let mut pairs = pipeline::base_pairs(&loaded.dataset, &images, &featurizer, ext_text.as_ref(), ext_image.as_ref())?;
            if let Some(p) = &checkpoint {
                let ckpt = Checkpoint::load(p)?;
                for pair in &mut pairs {
                    pair.text = ckpt.text.forward(&pair.text).map_err(|e| Error::Config(format!("{}: {e}", pair.id)))?;
                    pair.image = ckpt.image.forward(&pair.image).map_err(|e| Error::Config(format!("{}: {e}", pair.id)))?;
                }
            }
            let out = out_or(out, &out_dir, "pairs.jsonl");
            if let Some(o) = &out {
                ctx.write(|| embeddings::write_pairs(o, &pairs))?;
            }
            emit(json!({
                "schema": "geoicl.embed.v1",
                "records": pairs.len(),
                "text_dim": pairs.first().map(|p| p.text.dim()),
                "image_dim": pairs.first().map(|p| p.image.dim()),
                "adapted": checkpoint.is_some(),
                "out": out,
                "dry_run": dry,
            }));
        }
        Command::TrainRetriever { pairs, epochs, lr, temp, seed, batch_size, out, loss_csv } => {
            let mut cfg = ctx.cfg.clone();
            if let Some(e) = epochs {
                cfg.trainer.epochs = e;
            }
            if let Some(l) = lr {
                cfg.trainer.learning_rate = l;
            }
            if let Some(t) = temp {
                cfg.infonce.temperature = t;
            }
            if let Some(s) = seed {
                cfg.trainer.seed = s;
            }
            if let Some(b) = batch_size {
                cfg.trainer.batch_size = b;
            }
            let lines: Vec<PairLine> = embeddings::read_pairs(&pairs)?;
            let (ckpt, report) = pipeline::train(&lines, &cfg)?;
            let out = required(out, &ctx.cfg.paths.checkpoint, "checkpoint").or_else(|_| {
                out_dir.as_ref().map(|d| d.join("checkpoint.json")).ok_or_else(|| Error::Config("--out is required".into()))
            })?;
            let loss_csv = loss_csv.unwrap_or_else(|| out.with_extension("loss.csv"));
            ctx.write(|| {
                ckpt.save(&out)?;
                pipeline::write_loss_csv(&loss_csv, &report)
            })?;
            emit(json!({
                "schema": "geoicl.train_report.v1",
                "report": report,
                "checkpoint": out,
                "loss_csv": loss_csv,
                "dry_run": dry,
            }));
        }
        Command::BuildIndex { data, checkpoint, text_embeddings, out } => {
            let loaded = ctx.load(&data)?;
            let ckpt = Checkpoint::load(&required(checkpoint, &ctx.cfg.paths.checkpoint, "checkpoint")?)?;
            let ext = ctx.external(&text_embeddings, &loaded.dataset)?;
            let queries = Queries::new(&ckpt, ext.as_ref());
            let index = pipeline::build_index(&loaded.dataset, &queries)?;
            let out = required(out, &ctx.cfg.paths.index, "index")?;
            let (rows, dim) = (index.len(), index.dim());
            ctx.write(|| IndexFile::new(Space::Text, index).save(&out))?;
            emit(json!({ "schema": "geoicl.build_index.v1", "rows": rows, "dim": dim, "out": out, "dry_run": dry }));
        }
        Command::Query { index, id, k } => {
            let file = IndexFile::load(&required(index, &ctx.cfg.paths.index, "index")?)?;
            let query = file.index.row(&id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            let hits = file.index.top_k(&query, k, QueryOptions { exclude: Some(&id), strict: false })?;
            emit(json!({ "schema": "geoicl.query.v1", "id": id, "k": k, "hits": hits }));
        }
        Command::BuildMeta { data, index, k, fan_out, out } => {
            let loaded = ctx.load(&data)?;
            let file = IndexFile::load(&required(index, &ctx.cfg.paths.index, "index")?)?;
            let mut meta = ctx.cfg.meta.clone();
            meta.k = k.unwrap_or(meta.k);
            meta.fan_out = fan_out.unwrap_or(meta.fan_out);
            let train = loaded.dataset.filter_split(Split::Train);
            let samples = pipeline::build_meta(&train, &file.index, &ctx.images(&loaded), &meta)?;
            let out = required(out, &out_dir.as_ref().map(|d| d.join("meta")), "out")?;
            ctx.write(|| pipeline::write_meta(&out, &samples).map(|_| ()))?;
            emit(json!({
                "schema": "geoicl.build_meta.v1",
                "samples": samples.len(),
                "k": meta.k,
                "fan_out": meta.fan_out,
                "out": out.join("meta.jsonl"),
                "dry_run": dry,
            }));
        }
        Command::Augment { data, n, stub, out } => {
            let loaded = ctx.load(&data)?;
            let n = n.unwrap_or(ctx.cfg.augment.variants);
            let conc = ctx.cfg.backend.concurrency;
            let augmented = if stub {
                pipeline::augment(&loaded.dataset, n, &StubParaphraser, conc)?
            } else {
                let url = ctx.cfg.backend.paraphrase_url.as_deref().ok_or_else(|| {
                    Error::Config("no paraphrase service: set backend.paraphrase_url or GEOICL_PARAPHRASE_URL, or pass --stub".into())
                })?;
                pipeline::augment(&loaded.dataset, n, &HttpParaphraser::new(url, ctx.cfg.backend.retry()), conc)?
            };
            let out = out_or(out, &out_dir, "augmented.jsonl");
            if let Some(o) = &out {
                ctx.warn_if_moved(&data, &loaded, o);
                ctx.write(|| dataset::write_dataset(o, &augmented))?;
            }
            emit(json!({
                "schema": "geoicl.augment.v1",
                "records_in": loaded.dataset.len(),
                "records_out": augmented.len(),
                "variants_per_record": n,
                "out": out,
                "dry_run": dry,
            }));
        }
        Command::Eval { eval, no_icl } => {
            let result = with_eval_setup(&ctx, &eval, |name, split, ectx, backend, cfg, conc| {
                pipeline::run_eval(name, split, ectx, backend, cfg, !no_icl, conc)
            })?;
            if let Some(o) = &eval.out {
                ctx.write(|| pipeline::write_eval(o, &result))?;
            }
            eprint!("{}", result.render_table());
            emit(serde_json::to_value(&result)?);
        }
        Command::CompareIcl { eval } => {
            let cmp = with_eval_setup(&ctx, &eval, |name, split, ectx, backend, cfg, conc| {
                pipeline::compare_icl(name, split, ectx, backend, cfg, conc)
            })?;
            if let Some(o) = &eval.out {
                ctx.write(|| pipeline::write_comparison(o, &cmp))?;
            }
            eprint!("{}", cmp.render_table());
            emit(serde_json::to_value(&cmp)?);
        }
        Command::EmitFinetuneConfig { out } => {
            let config = FinetuneConfig::default();
            if let Some(o) = out_or(out, &out_dir, "finetune.json") {
                ctx.write(|| dataset::write_json(&o, &config))?;
            }
            emit(serde_json::to_value(&config)?);
        }
        Command::Synth { out, seed, train_per_family, test_per_family, disagree_every } => {
            let d = SynthConfig::default();
            let cfg = SynthConfig {
                seed: seed.unwrap_or(d.seed),
                train_per_family: train_per_family.unwrap_or(d.train_per_family),
                test_per_family: test_per_family.unwrap_or(d.test_per_family),
                disagree_every: disagree_every.unwrap_or(d.disagree_every),
                ..d
            };
            let generated = synth::generate(&cfg);
            ctx.write(|| synth::write(&out, &generated).map(|_| ()))?;
            emit(json!({
                "schema": "geoicl.synth.v1",
                "config": cfg,
                "records": generated.dataset.len(),
                "out": out.join("dataset.jsonl"),
                "dry_run": dry,
            }));
        }
        Command::Run { data, mock, out } => {
            let loaded = ctx.load(&data)?;
            let out = required(out, &out_dir, "out")?;
            if dry {
                emit(json!({ "schema": "geoicl.run.v1", "records": loaded.dataset.len(), "out": out, "dry_run": true }));
                return Ok(());
            }
            let outputs = pipeline::run_all(&loaded.dataset, &ctx.images(&loaded), &ctx.cfg, mock.into(), &out)?;
            emit(json!({ "schema": "geoicl.run.v1", "outputs": outputs, "dry_run": false }));
        }
    }
    Ok(())
}

fn with_eval_setup<T, F>(ctx: &Ctx, args: &EvalArgs, f: F) -> Result<T>
where
    F: FnOnce(
            &str,
            &Dataset,
            &EvalContext<'_, DiskImages, Queries<'_>>,
            &(dyn Backend + Sync),
            &geoicl_core::eval::EvalConfig,
            usize,
        ) -> Result<T>,
{
    let loaded = ctx.load(&args.data)?;
    let ckpt = Checkpoint::load(&required(args.checkpoint.clone(), &ctx.cfg.paths.checkpoint, "checkpoint")?)?;
    let index = IndexFile::load(&required(args.index.clone(), &ctx.cfg.paths.index, "index")?)?;
    let ext = ctx.external(&args.text_embeddings, &loaded.dataset)?;
    let queries = Queries::new(&ckpt, ext.as_ref());
    let images = ctx.images(&loaded);
    let mut meta = ctx.cfg.meta.clone();
    meta.k = args.k.unwrap_or(meta.k);
    let mut eval_cfg = ctx.cfg.eval.clone();
    eval_cfg.lenient |= args.lenient_backend;
    let train = loaded.dataset.filter_split(Split::Train);
    let split = loaded.dataset.filter_split(args.split.into());
    let backend: Box<dyn Backend + Sync> = match (args.mock, &ctx.cfg.backend.url) {
        (Some(m), _) => pipeline::mock_backend(m.into(), &loaded.dataset, &meta, ctx.cfg.backend.mock_seed),
        (None, Some(url)) => Box::new(HttpBackend::new(url, ctx.cfg.backend.retry())),
        (None, None) => {
            return Err(Error::Config("no backend: pass --mock, set backend.url or GEOICL_BACKEND_URL".into()))
        }
    };
    let ectx = EvalContext { train_set: &train, index: &index.index, images: &images, queries: &queries, meta: &meta };
    let name = ctx.dataset_name(&args.data);
    f(&name, &split, &ectx, backend.as_ref(), &eval_cfg, ctx.cfg.backend.concurrency)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).target(env_logger::Target::Stderr).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            emit(serde_json::to_value(e.report()).expect("error report serializes"));
            ExitCode::FAILURE
        }
    }
}
