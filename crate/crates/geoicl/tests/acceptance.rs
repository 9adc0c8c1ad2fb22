//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use geoicl::config::PipelineConfig;
use geoicl::pipeline::{self, Mock, Queries};
use geoicl::synth::{self, SynthConfig};
use geoicl_core::adapter::{AdapterParams, Embedding};
use geoicl_core::augment::{augment_dataset, validate_variant, StubParaphraser};
use geoicl_core::compose::{build_meta_dataset, MetaConfig};
use geoicl_core::eval::{EvalConfig, EvalContext, ItemStatus};
use geoicl_core::finetune::FinetuneConfig;
use geoicl_core::index::{QueryOptions, SimilarityIndex};
use geoicl_core::infonce::{info_nce_gradients, info_nce_loss, InfoNceConfig};
use geoicl_core::normalize::{normalize, SymbolTable};
use geoicl_core::record::{AnswerValue, ImageRef, Language, Source};
use geoicl_core::train::{recall_at_k, train_retriever, Optimizer, Pair, TrainerConfig};
use geoicl_core::{Dataset, GeoRecord, ImageRaster, QuestionType, Split};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Embedding {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return Embedding::new(v.into_iter().map(|x| x / n).collect());
        }
    }
}

// 1 ------------------------------------------------------------------------

fn tower_loss(text: &AdapterParams, image: &AdapterParams, pairs: &[(Embedding, Embedding)], cfg: &InfoNceConfig) -> f64 {
    let t: Vec<Embedding> = pairs.iter().map(|(x, _)| text.forward(x).unwrap()).collect();
    let v: Vec<Embedding> = pairs.iter().map(|(_, y)| image.forward(y).unwrap()).collect();
    info_nce_loss(&t.iter().collect::<Vec<_>>(), &v.iter().collect::<Vec<_>>(), cfg).unwrap()
}

fn max_grad_error(seed: u64) -> f64 {
    const EPS: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let cfg = InfoNceConfig::default();
    let dims = [8, 16, 16, 8];
    let text = AdapterParams::init(seed, dims).unwrap();
    let image = AdapterParams::init(seed ^ 0x5eed, dims).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    let mut v = || Embedding::new((0..8).map(|_| rng.random_range(-1.0..1.0)).collect());
    let pairs: Vec<(Embedding, Embedding)> = (0..4).map(|_| (v(), v())).collect();
    let refs: Vec<(&Embedding, &Embedding)> = pairs.iter().map(|(a, b)| (a, b)).collect();
    let g = info_nce_gradients(&text, &image, &refs, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for tower in 0..2 {
        let analytic = if tower == 0 { &g.text } else { &g.image };
        for t in 0..6 {
            for i in 0..analytic.tensors()[t].len() {
                let probe = |delta: f64| {
                    let (mut tp, mut ip) = (text.clone(), image.clone());
                    let p = if tower == 0 { &mut tp } else { &mut ip };
                    p.tensors_mut()[t][i] += delta;
                    tower_loss(&tp, &ip, &pairs, &cfg)
                };
                let numeric = (probe(EPS) - probe(-EPS)) / (2.0 * EPS);
                let a = analytic.tensors()[t][i];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR));
            }
        }
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let seeds = 24;
    let worst = (0..seeds).map(max_grad_error).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-4, "max relative error {worst:.3e} > 1e-4");
    ensure!(secs < 10.0, "took {secs:.2}s");
    Ok(format!("{seeds} seeds, max rel err {worst:.2e}, {secs:.2}s"))
}

// 2 ------------------------------------------------------------------------

/// Mean negative log softmax of the diagonal, both directions, written out
/// directly from the definition.
fn direct_infonce(text: &[Embedding], image: &[Embedding], tau: f64) -> f64 {
    let n = text.len();
    let s = |i: usize, j: usize| text[i].dot(&image[j]) / tau;
    let mut rows = 0.0;
    let mut cols = 0.0;
    for i in 0..n {
        let zr: f64 = (0..n).map(|j| s(i, j).exp()).sum();
        rows -= (s(i, i).exp() / zr).ln();
        let zc: f64 = (0..n).map(|j| s(j, i).exp()).sum();
        cols -= (s(i, i).exp() / zc).ln();
    }
    (rows + cols) / (2.0 * n as f64)
}

fn infonce_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 1..=4 {
        for tau in [0.07, 0.5, 1.0] {
            for _ in 0..50 {
                let t: Vec<Embedding> = (0..n).map(|_| unit(&mut rng, 3)).collect();
                let v: Vec<Embedding> = (0..n).map(|_| unit(&mut rng, 3)).collect();
                let cfg = InfoNceConfig { temperature: tau, symmetric: true };
                let got = info_nce_loss(&t.iter().collect::<Vec<_>>(), &v.iter().collect::<Vec<_>>(), &cfg).unwrap();
                let want = direct_infonce(&t, &v, tau);
                worst = worst.max((got - want).abs());
                if n == 1 {
                    ensure!(got == 0.0, "N=1 loss {got:e} is not exactly 0");
                }
                cases += 1;
            }
        }
    }
    ensure!(worst <= 1e-9, "max |Δ| vs direct softmax {worst:.3e}");
    let e = [Embedding::new(vec![1.0, 0.0]), Embedding::new(vec![0.0, 1.0])];
    let cfg = InfoNceConfig { temperature: 1.0, symmetric: true };
    let got = info_nce_loss(&[&e[0], &e[1]], &[&e[0], &e[1]], &cfg).unwrap();
    // Diagonal logit 1, off-diagonal 0: -ln(e / (e + 1)) = ln(1 + e^-1).
    let want = (1.0 + (-1.0f64).exp()).ln();
    ensure!((got - want).abs() <= 1e-9, "orthogonal 2x2 loss {got} != {want}");
    Ok(format!("{cases} batches, max |Δ| {worst:.1e}, 2x2 orthogonal {got:.12}"))
}

// 3 ------------------------------------------------------------------------

/// Pairs whose text and image vectors are two noisy linear views of one
/// latent factor per pair.
fn planted_pairs(n: usize, seed: u64) -> Vec<Pair> {
    const LATENT: usize = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = |rows: usize| -> Vec<Vec<f64>> {
        (0..rows).map(|_| (0..LATENT).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    };
    let (a, b) = (matrix(32), matrix(24));
    let project = |m: &[Vec<f64>], z: &[f64], rng: &mut ChaCha8Rng| {
        Embedding::new(
            m.iter().map(|row| row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + rng.random_range(-0.05..0.05)).collect(),
        )
    };
    (0..n)
        .map(|i| {
            let z: Vec<f64> = (0..LATENT).map(|_| rng.random_range(-1.0..1.0)).collect();
            Pair { id: format!("pair{i:03}"), text: project(&a, &z, &mut rng), image: project(&b, &z, &mut rng) }
        })
        .collect()
}

fn retrieval_training() -> Outcome {
    let pairs = planted_pairs(256, 11);
    let cfg = TrainerConfig {
        learning_rate: 0.05,
        batch_size: 32,
        epochs: 150,
        seed: 3,
        optimizer: Optimizer::Momentum { beta: 0.9 },
        shuffle: true,
        hidden: [64, 64],
        shared_dim: 32,
    };
    let (ts, is) = (cfg.seed, cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let baseline = recall_at_k(
        &AdapterParams::init(ts, cfg.tower_dims(32)).unwrap(),
        &AdapterParams::init(is, cfg.tower_dims(24)).unwrap(),
        &pairs,
        1,
    )
    .unwrap();
    let start = Instant::now();
    let trained = train_retriever(&pairs, None, &cfg, &InfoNceConfig::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let recall = trained.report.recall_at_1;
    let direct = recall_at_k(&trained.text, &trained.image, &pairs, 1).unwrap();
    ensure!(recall == direct, "report recall {recall} != direct {direct}");
    ensure!(recall >= 0.90, "recall@1 {recall:.3} < 0.90");
    ensure!(baseline < 0.2, "untrained recall@1 {baseline:.3} not < 0.2");
    ensure!(secs < 60.0, "took {secs:.1}s");
    Ok(format!("recall@1 {recall:.3} after {} epochs (untrained {baseline:.3}), {secs:.1}s", cfg.epochs))
}

// 4 ------------------------------------------------------------------------

fn brute_force(rows: &[(String, Embedding)], q: &Embedding, k: usize, exclude: Option<&str>) -> Vec<String> {
    let qn = q.norm();
    let mut scored: Vec<(f64, &str)> =
        rows.iter().filter(|(id, _)| Some(id.as_str()) != exclude).map(|(id, e)| (e.dot(q) / qn, id.as_str())).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

fn index_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<(String, Embedding)> = (0..1000).map(|i| (format!("r{i:04}"), unit(&mut rng, 16))).collect();
    let index = SimilarityIndex::build(rows.clone()).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for _ in 0..100 {
        let q = unit(&mut rng, 16);
        for k in [1, 5, 50] {
            let got: Vec<String> = index.top_k(&q, k, QueryOptions::default()).unwrap().into_iter().map(|h| h.id).collect();
            ensure!(got == brute_force(&rows, &q, k, None), "top-{k} differs from brute force");
            checked += 1;
        }
    }
    let mut violations = 0;
    for trial in 0..10_000u64 {
        let n = rng.random_range(1..30);
        // Few distinct directions so exact ties are common.
        let dirs: Vec<Embedding> = (0..3).map(|_| unit(&mut rng, 4)).collect();
        let small: Vec<(String, Embedding)> =
            (0..n).map(|i| (format!("t{trial}-{i:02}"), dirs[rng.random_range(0..3)].clone())).collect();
        let idx = SimilarityIndex::build(small.clone()).unwrap();
        let (self_id, self_vec) = &small[rng.random_range(0..n)];
        let k = rng.random_range(1..=n);
        match idx.top_k(self_vec, k, QueryOptions { exclude: Some(self_id), strict: false }) {
            Ok(hits) => {
                let ids: Vec<String> = hits.into_iter().map(|h| h.id).collect();
                if ids.iter().any(|id| id == self_id) || ids != brute_force(&small, self_vec, k, Some(self_id)) {
                    violations += 1;
                }
            }
            Err(_) if n == 1 => {}
            Err(_) => violations += 1,
        }
    }
    ensure!(violations == 0, "{violations} self-exclusion violations");
    Ok(format!("{checked} top-k queries exact, 10000 self-exclusion trials, 0 violations"))
}

// 5 ------------------------------------------------------------------------

fn record(id: &str, split: Split, answer: usize) -> GeoRecord {
    GeoRecord {
        id: id.into(),
        question_raw: format!("In △ABC find x for {id}."),
        question_norm: None,
        image: ImageRef::Path(format!("{id}.png")),
        solution_steps: vec!["Angle sum.".into()],
        answer: AnswerValue::Choice(answer),
        choices: vec!["1".into(), "2".into(), "3".into(), "4".into()],
        qtype: QuestionType::Selection,
        split,
        source: Source::GeoQaPlus,
        language: Language::En,
        synthetic: false,
    }
}

fn meta_case(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let k = rng.random_range(0..=3usize);
    let fan_out = rng.random_range(1..=2usize);
    let channels = if rng.random_bool(0.5) { 1 } else { 3 };
    let n_train = k * fan_out + rng.random_range(1..6);
    let mut records = Vec::new();
    for i in 0..n_train {
        records.push(record(&format!("tr{i}"), Split::Train, rng.random_range(0..4)));
    }
    for i in 0..rng.random_range(0..5) {
        let split = if rng.random_bool(0.5) { Split::Val } else { Split::Test };
        records.push(record(&format!("ho{i}"), split, 0));
    }
    let mut images = BTreeMap::new();
    for r in &records {
        let (w, h) = (rng.random_range(1..7u32), rng.random_range(1..5u32));
        let px = (0..w * h * channels as u32).map(|_| rng.random_range(0..=254u8)).collect();
        images.insert(r.id.clone(), ImageRaster::new(w, h, channels, px).unwrap());
    }
    // Held-out records go into the index too; they must never be used as context.
    let dirs: Vec<Embedding> = (0..4).map(|_| unit(rng, 3)).collect();
    let index = SimilarityIndex::build(records.iter().map(|r| (r.id.clone(), dirs[rng.random_range(0..4)].clone())))
        .map_err(|e| e.to_string())?;
    let dataset = Dataset::new(records).map_err(|e| e.to_string())?;
    let cfg = MetaConfig { k, fan_out, pad_value: 255, ..MetaConfig::default() };
    let samples = build_meta_dataset(&dataset, &index, &images, &cfg).map_err(|e| e.to_string())?;
    // Zero-shot samples have no neighbor groups to fan out over.
    let expected = if k == 0 { n_train } else { n_train * fan_out };
    ensure!(samples.len() == expected, "{} samples for {n_train} train records", samples.len());
    for s in &samples {
        let p = &s.provenance;
        ensure!(p.context_ids.len() == k, "context length {}", p.context_ids.len());
        ensure!(!p.context_ids.contains(&p.target_id), "target {} in its own context", p.target_id);
        for c in &p.context_ids {
            ensure!(dataset.get(c).is_some_and(|r| r.split == Split::Train), "non-train context {c}");
        }
        ensure!(cfg.template.count_question_blocks(&s.prompt) == k + 1, "question blocks != K+1");
        let parts: Vec<&ImageRaster> = p.context_ids.iter().chain([&p.target_id]).map(|id| &images[id]).collect();
        let m = &s.merged_image;
        ensure!(m.height() == parts.iter().map(|r| r.height()).sum::<u32>(), "merged height");
        ensure!(m.width() == parts.iter().map(|r| r.width()).max().unwrap(), "merged width");
        let mut y0 = 0;
        for part in parts {
            for y in 0..part.height() {
                for x in 0..m.width() {
                    let want: Vec<u8> =
                        if x < part.width() { part.pixel(x, y).to_vec() } else { vec![255; channels as usize] };
                    ensure!(m.pixel(x, y0 + y) == want.as_slice(), "pixel ({x},{}) wrong", y0 + y);
                }
            }
            y0 += part.height();
        }
    }
    Ok(samples.len())
}

fn meta_composition() -> Outcome {
    ensure!(MetaConfig::default().k == 1, "default K is {}", MetaConfig::default().k);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples = 0;
    let cases = 1500;
    for case in 0..cases {
        samples += meta_case(&mut rng).map_err(|e| format!("case {case}: {e}"))?;
    }
    Ok(format!("{cases} randomized datasets, {samples} samples, default K = 1"))
}

// 6 ------------------------------------------------------------------------

fn mutate(text: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    let chars: Vec<char> = text.chars().collect();
    let digits: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_ascii_digit()).collect();
    let letters: Vec<usize> = (0..chars.len())
        .filter(|&i| {
            let alone = |j: Option<&char>| j.map_or(true, |c| !c.is_alphanumeric());
            chars[i].is_ascii_uppercase() && alone(i.checked_sub(1).and_then(|j| chars.get(j))) && alone(chars.get(i + 1))
        })
        .collect();
    let mut out = chars.clone();
    match rng.random_range(0..4) {
        0 if !digits.is_empty() => {
            let i = *digits.choose(rng)?;
            out[i] = char::from(b'0' + ((chars[i] as u8 - b'0' + rng.random_range(1..10)) % 10));
        }
        1 if !digits.is_empty() => {
            let i = *digits.choose(rng)?;
            out.remove(i);
        }
        2 if !letters.is_empty() => {
            let i = *letters.choose(rng)?;
            out[i] = char::from(b'A' + ((chars[i] as u8 - b'A' + rng.random_range(1..26)) % 26));
        }
        _ => {
            let extra = format!(" {}", rng.random_range(0..1000));
            return Some(format!("{text}{extra}"));
        }
    }
    let s: String = out.into_iter().collect();
    (s != text).then_some(s)
}

fn augmentation() -> Outcome {
    let synth = synth::generate(&SynthConfig::default());
    let d = &synth.dataset;
    let aug = augment_dataset(d, 5, &StubParaphraser).map_err(|e| e.to_string())?;
    ensure!(aug.len() == 6 * d.len(), "{} records, expected {}", aug.len(), 6 * d.len());
    for r in aug.iter().filter(|r| r.synthetic) {
        let src = d.get(r.source_id()).ok_or(format!("orphan variant {}", r.id))?;
        ensure!(
            r.answer == src.answer && r.image == src.image && r.qtype == src.qtype && r.choices == src.choices,
            "variant {} changed its label",
            r.id
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut planted, mut rejected) = (0, 0);
    while planted < 5000 {
        let src = &d.records()[rng.random_range(0..d.len())].question_raw;
        let Some(m) = mutate(src, &mut rng) else { continue };
        planted += 1;
        if validate_variant(src, &m).is_err() {
            rejected += 1;
        }
    }
    ensure!(rejected == planted, "only {rejected} of {planted} planted mutations rejected");
    Ok(format!("{} -> {} records, {planted}/{planted} mutations rejected", d.len(), aug.len()))
}

// 7 ------------------------------------------------------------------------

fn small_pipeline_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.trainer = TrainerConfig { epochs: 30, batch_size: 16, hidden: [64, 64], shared_dim: 32, seed: 5, ..TrainerConfig::default() };
    cfg.augment.variants = 2;
    cfg.backend.concurrency = 4;
    cfg
}

fn icl_benefit() -> Outcome {
    let synth =
        synth::generate(&SynthConfig { train_per_family: 8, test_per_family: 6, disagree_every: 18, ..SynthConfig::default() });
    let cfg = small_pipeline_config();
    let pairs = pipeline::base_pairs(&synth.dataset, &synth.images, &cfg.featurizer, None, None).map_err(|e| e.to_string())?;
    let (ckpt, _) = pipeline::train(&pairs, &cfg).map_err(|e| e.to_string())?;
    let queries = Queries::new(&ckpt, None);
    let index = pipeline::build_index(&synth.dataset, &queries).map_err(|e| e.to_string())?;
    let train = synth.dataset.filter_split(Split::Train);
    let test = synth.dataset.filter_split(Split::Test);
    let ctx = EvalContext { train_set: &train, index: &index, images: &synth.images, queries: &queries, meta: &cfg.meta };
    let eval_cfg = EvalConfig::default();

    let copy = pipeline::mock_backend(Mock::CopyContext, &synth.dataset, &cfg.meta, 0);
    let cmp = pipeline::compare_icl("synth", &test, &ctx, copy.as_ref(), &eval_cfg, 4).map_err(|e| e.to_string())?;
    let graded: Vec<_> = cmp.with_icl.items.iter().filter(|i| i.status != ItemStatus::Unsupported).collect();
    let agree = graded
        .iter()
        .filter(|i| {
            let target = synth.dataset.get(&i.id).unwrap();
            let neighbor = synth.dataset.get(&i.context_ids[0]).unwrap();
            neighbor.answer == target.answer
        })
        .count();
    let agreement = agree as f64 / graded.len() as f64;
    ensure!(agreement >= 0.90, "planted neighbor agreement {agreement:.3} < 0.90");
    ensure!(agreement < 1.0, "fixture has no disagreeing neighbors");
    ensure!(cmp.with_icl.accuracy == agreement, "copy-context accuracy {} != agreement {agreement}", cmp.with_icl.accuracy);
    ensure!(cmp.delta > 0.0, "delta {} not positive", cmp.delta);
    ensure!(cmp.p_value < 0.01, "sign test p = {:.3e}", cmp.p_value);

    let gold = pipeline::mock_backend(Mock::Gold, &synth.dataset, &cfg.meta, 0);
    let g = pipeline::run_eval("synth", &test, &ctx, gold.as_ref(), &eval_cfg, true, 4).map_err(|e| e.to_string())?;
    ensure!(g.accuracy == 1.0, "gold oracle accuracy {}", g.accuracy);
    Ok(format!(
        "n={}, agreement {:.3}, acc {:.3} -> {:.3} (delta {:+.3}, p {:.1e}), gold 1.0",
        graded.len(),
        agreement,
        cmp.without_icl.accuracy,
        cmp.with_icl.accuracy,
        cmp.delta,
        cmp.p_value
    ))
}

// 8 ------------------------------------------------------------------------

fn finetune_config() -> Outcome {
    let value = serde_json::to_value(FinetuneConfig::default()).map_err(|e| e.to_string())?;
    let expected = serde_json::json!({
        "learning_rate": 2e-4,
        "lr_scheduler": "cosine",
        "num_train_epochs": 5,
        "max_length": 2048,
        "per_device_train_batch_size": 4,
        "gradient_accumulation_steps": 4,
    });
    for (key, want) in expected.as_object().unwrap() {
        ensure!(value.get(key) == Some(want), "{key}: {:?} != {want}", value.get(key));
    }
    ensure!(value["learning_rate"].as_f64() == Some(0.0002), "learning rate not exactly 2e-4");
    Ok("lr 2e-4, cosine, 5 epochs, max length 2048, batch 4, grad-accum 4".into())
}

// 9 ------------------------------------------------------------------------

fn normalizer() -> Outcome {
    let cases = [("△ABC ≌ △DEF", "triangle ABC congruent to triangle DEF"), ("AB ⊥ CD", "AB perpendicular to CD")];
    for (input, want) in cases {
        let got = normalize(input);
        ensure!(got == want, "{input:?} -> {got:?}, expected {want:?}");
    }
    let table = SymbolTable::default();
    let alphabet: Vec<char> = "△⊥∠∥≌∽°π√≈≤≥²³ABCxy 0123456789.,\\trianglepsqr".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let trials = 2000;
    for _ in 0..trials {
        let len = rng.random_range(0..40);
        let s: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        let once = table.normalize(&s);
        let twice = table.normalize(&once);
        ensure!(once == twice, "not idempotent on {s:?}: {once:?} -> {twice:?}");
    }
    Ok(format!("both examples verbatim, idempotent on {trials} random strings"))
}

// 10 -----------------------------------------------------------------------

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let synth = synth::generate(&SynthConfig { train_per_family: 4, test_per_family: 2, ..SynthConfig::default() });
    let mut cfg = small_pipeline_config();
    cfg.trainer.epochs = 8;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        pipeline::run_all(&synth.dataset, &synth.images, &cfg, Mock::Random, dir).map_err(|e| e.to_string())?;
    }
    let (fa, fb) = (files(&a), files(&b));
    ensure!(fa.keys().eq(fb.keys()), "runs wrote different file sets");
    for required in ["checkpoint.json", "index.json", "meta/meta.jsonl", "compare.json"] {
        ensure!(fa.contains_key(required), "missing {required}");
    }
    if let Some((name, _)) = fa.iter().find(|(k, v)| fb[*k] != **v) {
        return Err(format!("{name} differs between runs"));
    }
    Ok(format!("{} files bit-identical across two runs", fa.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient correctness", gradient_correctness),
        ("InfoNCE oracle equivalence", infonce_oracle),
        ("synthetic retrieval training", retrieval_training),
        ("index exactness", index_exactness),
        ("meta-composition invariants", meta_composition),
        ("augmentation arithmetic", augmentation),
        ("ICL benefit", icl_benefit),
        ("fine-tune config fidelity", finetune_config),
        ("normalizer", normalizer),
        ("end-to-end determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = fmt_secs(start.elapsed());
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took}]", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{took}]", n + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fmt_secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}
