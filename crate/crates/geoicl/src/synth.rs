//! Synthetic geometry problems with known neighbor structure.
//!
//! Problems come in families. Records of one family share wording, symbols,
//! diagram layout and the position of the correct option, so a record's
//! nearest train neighbor normally carries the right answer. Test records can
//! be planted to disagree with their family.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use geoicl_core::record::{AnswerValue, ImageRef, Language, Source};
use geoicl_core::{Dataset, GeoRecord, ImageRaster, QuestionType, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset;
use crate::error::Result;
use crate::png;

pub const FAMILIES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Number of problem families, at most [`FAMILIES`].
    pub families: usize,
    pub train_per_family: usize,
    pub val_per_family: usize,
    pub test_per_family: usize,
    /// Every n-th selection test record gets an answer position different
    /// from its family. `0` plants none.
    pub disagree_every: usize,
    /// Add one proving record to the test split.
    pub proving: bool,
    pub image_size: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            families: FAMILIES,
            train_per_family: 6,
            val_per_family: 1,
            test_per_family: 3,
            disagree_every: 0,
            proving: true,
            image_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synth {
    pub dataset: Dataset,
    pub images: BTreeMap<String, ImageRaster>,
}

struct Problem {
    question: String,
    steps: Vec<String>,
    /// Correct value and distractor offsets for selection, `None` for cloze.
    options: Option<(i64, [i64; 3])>,
    cloze: Option<f64>,
}

const TRIPLES: [(i64, i64, i64); 4] = [(3, 4, 5), (5, 12, 13), (8, 15, 17), (7, 24, 25)];

fn problem(family: usize, rng: &mut ChaCha8Rng) -> Problem {
    let sel = |question: String, steps: &[&str], correct: i64, offsets: [i64; 3]| Problem {
        question,
        steps: steps.iter().map(|s| s.to_string()).collect(),
        options: Some((correct, offsets)),
        cloze: None,
    };
    match family {
        0 => {
            let a = 2 * rng.random_range(10..40);
            sel(
                format!("In △ABC, AB = AC and ∠A = {a}°. Find the measure of ∠B."),
                &["Base angles of an isosceles triangle are equal.", "∠B = (180° − ∠A) / 2."],
                (180 - a) / 2,
                [10, -10, 20],
            )
        }
        1 => {
            let (x, y, z) = TRIPLES[rng.random_range(0..TRIPLES.len())];
            sel(
                format!("In right △ABC, ∠C = 90°, AC = {x} and BC = {y}. Find the length of AB."),
                &["Apply the Pythagorean theorem: AB² = AC² + BC²."],
                z,
                [1, 2, -1],
            )
        }
        2 => {
            let x = rng.random_range(20..80);
            sel(
                format!("Points A, B and C lie on ⊙O and the central angle ∠AOB = {}°. Find the inscribed angle ∠ACB.", 2 * x),
                &["An inscribed angle is half the central angle on the same arc."],
                x,
                [x, 5, -5],
            )
        }
        3 => {
            let x = rng.random_range(15..75);
            sel(
                format!("Line CD ⊥ AB at point D and ∠ACD = {x}°. Find ∠CAD."),
                &["△ACD has a right angle at D.", "∠CAD = 90° − ∠ACD."],
                90 - x,
                [x - (90 - x) + 1, 10, -10],
            )
        }
        4 => {
            let x = rng.random_range(40..140);
            Problem {
                question: format!(
                    "Lines a ∥ b are cut by a transversal forming co-interior angles ∠1 = {x}° and ∠2. Find ∠1 + ∠2 in degrees."
                ),
                steps: vec!["Co-interior angles between parallel lines are supplementary.".into()],
                options: None,
                cloze: Some(180.0),
            }
        }
        5 => {
            let s = rng.random_range(2..20);
            Problem {
                question: format!("Quadrilateral ABCD is a square with side length {s} cm. Find ∠ABC in degrees."),
                steps: vec!["Every interior angle of a square is a right angle.".into()],
                options: None,
                cloze: Some(90.0),
            }
        }
        6 => {
            let (x, y, z) = TRIPLES[rng.random_range(0..TRIPLES.len())];
            let k = rng.random_range(1..4);
            sel(
                format!("Rectangle ABCD has AB = {} and BC = {}. Find the length of diagonal AC.", k * x, k * y),
                &["The diagonal splits the rectangle into two right triangles.", "AC² = AB² + BC²."],
                k * z,
                [k, -k, 2 * k],
            )
        }
        _ => {
            let x: i64 = rng.random_range(30..70);
            let y = rng.random_range(30..70);
            let interior = match 180 - 2 * (x + y) {
                d if d.abs() == 10 => 20,
                d => d,
            };
            sel(
                format!("In △ABC, ∠A = {x}° and ∠B = {y}°. Find the exterior angle at vertex C."),
                &["An exterior angle equals the sum of the two remote interior angles."],
                x + y,
                [-10, 10, interior],
            )
        }
    }
}

/// Family `f` draws a dark horizontal band whose height and position depend
/// on `f`, plus a thin vertical stroke placed per record.
fn diagram(family: usize, size: u32, rng: &mut ChaCha8Rng) -> ImageRaster {
    let mut raster = vec![255u8; (size * size * 3) as usize];
    let band = size / FAMILIES as u32;
    let top = band * family as u32;
    let stroke = rng.random_range(0..size);
    let tint = [(family * 29 % 200) as u8, (family * 53 % 200) as u8, (family * 97 % 200) as u8];
    for y in 0..size {
        for x in 0..size {
            let in_band = y >= top && y < top + band.max(1) + (family as u32 % 3);
            if in_band || x == stroke {
                let i = ((y * size + x) * 3) as usize;
                raster[i..i + 3].copy_from_slice(&tint);
            }
        }
    }
    ImageRaster::new(size, size, 3, raster).expect("dimensions match pixel count")
}

fn choices(correct: i64, offsets: [i64; 3], gold: usize, unit: &str) -> Vec<String> {
    let mut values: Vec<i64> = offsets.iter().map(|o| correct + o).collect();
    values.insert(gold, correct);
    values.iter().map(|v| format!("{v}{unit}")).collect()
}

/// Position of the correct option for a selection family.
pub fn family_answer(family: usize) -> usize {
    family % 4
}

pub fn generate(cfg: &SynthConfig) -> Synth {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let families = cfg.families.min(FAMILIES);
    let mut records = Vec::new();
    let mut images = BTreeMap::new();
    let mut test_selection = 0usize;
    for (split, per_family, tag) in
        [(Split::Train, cfg.train_per_family, "tr"), (Split::Val, cfg.val_per_family, "va"), (Split::Test, cfg.test_per_family, "te")]
    {
        for i in 0..per_family {
            for family in 0..families {
                let id = format!("syn-{tag}-{family}-{i:03}");
                let p = problem(family, &mut rng);
                let unit = if matches!(family, 0 | 2 | 3 | 7) { "°" } else { "" };
                let (qtype, answer, choices) = match (p.options, p.cloze) {
                    (Some((correct, offsets)), _) => {
                        let mut gold = family_answer(family);
                        if split == Split::Test {
                            test_selection += 1;
                            if cfg.disagree_every > 0 && test_selection % cfg.disagree_every == 0 {
                                gold = (gold + 1) % 4;
                            }
                        }
                        (QuestionType::Selection, AnswerValue::Choice(gold), choices(correct, offsets, gold, unit))
                    }
                    (None, value) => (
                        QuestionType::Cloze,
                        AnswerValue::Numeric { value: value.unwrap_or_default(), rel_tol: None },
                        Vec::new(),
                    ),
                };
                images.insert(id.clone(), diagram(family, cfg.image_size, &mut rng));
                records.push(GeoRecord {
                    image: ImageRef::Path(format!("images/{id}.png")),
                    id,
                    question_raw: p.question,
                    question_norm: None,
                    solution_steps: p.steps,
                    answer,
                    choices,
                    qtype,
                    split,
                    source: Source::GeoMath,
                    language: Language::En,
                    synthetic: false,
                });
            }
        }
    }
    if cfg.proving {
        let id = "syn-te-proof-000".to_string();
        images.insert(id.clone(), diagram(0, cfg.image_size, &mut rng));
        records.push(GeoRecord {
            image: ImageRef::Path(format!("images/{id}.png")),
            id,
            question_raw: "In △ABC, AB = AC and D is the midpoint of BC. Prove that AD ⊥ BC.".into(),
            question_norm: None,
            solution_steps: vec!["△ABD ≅ △ACD by SSS.".into(), "∠ADB = ∠ADC and they sum to 180°.".into()],
            answer: AnswerValue::Text("AD ⊥ BC".into()),
            choices: Vec::new(),
            qtype: QuestionType::Proving,
            split: Split::Test,
            source: Source::GeoMath,
            language: Language::En,
            synthetic: false,
        });
    }
    Synth { dataset: Dataset::new(records).expect("generated ids are unique and records valid"), images }
}

/// Write `dataset.jsonl` and `images/*.png` under `dir`. Returns the dataset path.
pub fn write(dir: &Path, synth: &Synth) -> Result<PathBuf> {
    for (id, raster) in &synth.images {
        png::write(&dir.join("images").join(format!("{id}.png")), raster)?;
    }
    let path = dir.join("dataset.jsonl");
    dataset::write_dataset(&path, &synth.dataset)?;
    Ok(path)
}
