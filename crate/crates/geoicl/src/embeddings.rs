//! Embedding files: externally computed vectors (`{id, vector}` per line) and
//! training pairs (`{id, split, text, image}` per line).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use geoicl_core::record::{Dataset, Split};
use geoicl_core::train::Pair;
use geoicl_core::Embedding;
use serde::{Deserialize, Serialize};

use crate::dataset::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingLine {
    pub id: String,
    pub vector: Embedding,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| Error::MalformedRecord { line: i + 1, reason: e.to_string() })
        })
        .collect()
}

/// Parse external embeddings. All vectors must share one finite dimension;
/// with `known` given, every id must belong to that dataset.
pub fn parse_external(text: &str, known: Option<&Dataset>) -> Result<BTreeMap<String, Embedding>> {
    let mut out = BTreeMap::new();
    let mut dim = None;
    for (line, e) in parse_lines::<EmbeddingLine>(text)? {
        let expected = *dim.get_or_insert(e.vector.dim());
        if e.vector.dim() != expected || expected == 0 {
            return Err(Error::DimMismatch { id: e.id, expected, actual: e.vector.dim() });
        }
        if !e.vector.is_finite() {
            return Err(Error::MalformedRecord { line, reason: format!("non-finite value in `{}`", e.id) });
        }
        if known.is_some_and(|d| d.get(&e.id).is_none()) {
            return Err(Error::UnknownId(e.id));
        }
        if out.insert(e.id.clone(), e.vector).is_some() {
            return Err(Error::DuplicateId(e.id));
        }
    }
    Ok(out)
}

pub fn import_external_embeddings(path: &Path, known: Option<&Dataset>) -> Result<BTreeMap<String, Embedding>> {
    parse_external(&fs::read_to_string(path).map_err(Error::io(path))?, known)
}

pub fn render_embeddings(map: &BTreeMap<String, Embedding>) -> Result<String> {
    let mut out = String::new();
    for (id, v) in map {
        out.push_str(&serde_json::to_string(&EmbeddingLine { id: id.clone(), vector: v.clone() })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn export_embeddings(path: &Path, map: &BTreeMap<String, Embedding>) -> Result<()> {
    write_atomic(path, render_embeddings(map)?.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairLine {
    pub id: String,
    #[serde(default = "train_split")]
    pub split: Split,
    pub text: Embedding,
    pub image: Embedding,
}

fn train_split() -> Split {
    Split::Train
}

impl PairLine {
    pub fn to_pair(&self) -> Pair {
        Pair { id: self.id.clone(), text: self.text.clone(), image: self.image.clone() }
    }
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairLine>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let lines: Vec<PairLine> = parse_lines(&text)?.into_iter().map(|(_, p)| p).collect();
    Ok(lines)
}

pub fn render_pairs(pairs: &[PairLine]) -> Result<String> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_pairs(path: &Path, pairs: &[PairLine]) -> Result<()> {
    write_atomic(path, render_pairs(pairs)?.as_bytes())
}

/// Training pairs (train split) and held-out pairs (val split).
pub fn split_pairs(lines: &[PairLine]) -> (Vec<Pair>, Vec<Pair>) {
    let pick = |s: Split| lines.iter().filter(|p| p.split == s).map(PairLine::to_pair).collect();
    (pick(Split::Train), pick(Split::Val))
}
