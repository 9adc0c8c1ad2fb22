//! Paraphrase augmentation.
//!
//! Each record's question is rewritten `n` ways by a paraphrase client; the
//! variants become synthetic records `{id}#p{k}` that share the source's
//! image, steps, answer and split. A validator rejects any variant that
//! changes a numeric literal or a standalone capital letter (choice letters
//! and point labels), since either would silently corrupt the label.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{Dataset, DatasetError, GeoRecord, Language, VARIANT_SEPARATOR};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AugmentError {
    #[error("paraphrase client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("variant `{variant}` rejected: {reason}")]
    ValidationFailed { variant: String, reason: String },
    #[error("client returned {got} variants, expected {expected}")]
    WrongCount { expected: usize, got: usize },
    #[error("record `{id}`: {source}")]
    Record { id: String, source: alloc::boxed::Box<AugmentError> },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseRequest {
    pub text: String,
    pub n: usize,
    pub lang: Language,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseResponse {
    pub variants: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct ClientError(pub String);

/// Anything that can rewrite a text `n` ways.
pub trait Paraphraser {
    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<ParaphraseResponse, ClientError>;
}

/// Tokens that must survive paraphrasing: numeric literals and standalone
/// single capital letters, as sorted multisets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedTokens {
    pub numbers: Vec<String>,
    pub letters: Vec<char>,
}

pub fn protected_tokens(text: &str) -> ProtectedTokens {
    let chars: Vec<char> = text.chars().collect();
    let mut numbers = Vec::new();
    let mut letters = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            numbers.push(chars[start..i].iter().collect());
            continue;
        }
        if c.is_ascii_uppercase() {
            let before = i.checked_sub(1).map(|j| chars[j]);
            let after = chars.get(i + 1).copied();
            let standalone = |n: Option<char>| n.map_or(true, |n| !n.is_alphanumeric());
            if standalone(before) && standalone(after) {
                letters.push(c);
            }
        }
        i += 1;
    }
    numbers.sort();
    letters.sort_unstable();
    ProtectedTokens { numbers, letters }
}

/// Reject `variant` if it alters a number or standalone letter of `source`.
pub fn validate_variant(source: &str, variant: &str) -> Result<(), AugmentError> {
    let fail = |reason: String| Err(AugmentError::ValidationFailed { variant: variant.to_string(), reason });
    if variant.trim().is_empty() {
        return fail("empty variant".into());
    }
    let want = protected_tokens(source);
    let got = protected_tokens(variant);
    if want.numbers != got.numbers {
        return fail(format!("numeric literals changed from {:?} to {:?}", want.numbers, got.numbers));
    }
    if want.letters != got.letters {
        return fail(format!("choice letters or labels changed from {:?} to {:?}", want.letters, got.letters));
    }
    Ok(())
}

/// Check a response for count, distinctness and label preservation.
pub fn check_variants(source: &str, n: usize, variants: Vec<String>) -> Result<Vec<String>, AugmentError> {
    if variants.len() != n {
        return Err(AugmentError::WrongCount { expected: n, got: variants.len() });
    }
    let mut seen = BTreeSet::new();
    for v in &variants {
        if !seen.insert(v.as_str()) {
            return Err(AugmentError::ValidationFailed { variant: v.clone(), reason: "duplicate variant".into() });
        }
        validate_variant(source, v)?;
    }
    Ok(variants)
}

/// `n` validated rewrites of `text`.
pub fn paraphrase(text: &str, n: usize, lang: Language, client: &impl Paraphraser) -> Result<Vec<String>, AugmentError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let request = ParaphraseRequest { text: text.to_string(), n, lang };
    let response = client.paraphrase(&request).map_err(|e| AugmentError::ClientUnavailable(e.0))?;
    check_variants(text, n, response.variants)
}

/// Synthetic copy of `source` carrying a rewritten question.
pub fn variant_record(source: &GeoRecord, k: usize, question: String) -> GeoRecord {
    GeoRecord {
        id: format!("{}{VARIANT_SEPARATOR}{k}", source.id),
        question_raw: question,
        question_norm: None,
        synthetic: true,
        ..source.clone()
    }
}

/// Interleave originals with their variants: each original is followed by its
/// `n` variants in order. `variants[i]` belongs to `dataset.records()[i]`.
pub fn assemble_augmented(dataset: &Dataset, variants: Vec<Vec<String>>) -> Result<Dataset, AugmentError> {
    let mut out = Vec::with_capacity(dataset.len() * (1 + variants.first().map_or(0, Vec::len)));
    for (r, vs) in dataset.iter().zip(variants) {
        out.push(r.clone());
        out.extend(vs.into_iter().enumerate().map(|(k, q)| variant_record(r, k + 1, q)));
    }
    Ok(Dataset::new(out)?)
}

/// Expand `dataset` to `(n + 1) x` its size with paraphrased questions.
pub fn augment_dataset(dataset: &Dataset, n: usize, client: &impl Paraphraser) -> Result<Dataset, AugmentError> {
    let variants = dataset
        .iter()
        .map(|r| {
            paraphrase(&r.question_raw, n, r.language, client)
                .map_err(|e| AugmentError::Record { id: r.id.clone(), source: alloc::boxed::Box::new(e) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    assemble_augmented(dataset, variants)
}

const STUB_TEMPLATES: [&str; 5] = [
    "{}",
    "Please solve the following problem. {}",
    "Consider this geometry problem: {}",
    "Here is a question to work out. {}",
    "Solve: {}",
];

const STUB_SYNONYMS: [(&str, &str); 6] = [
    ("Find", "Determine"),
    ("find", "determine"),
    ("Calculate", "Compute"),
    ("calculate", "compute"),
    ("length", "measure"),
    ("shown", "given"),
];

/// Offline paraphraser: synonym swaps and fixed framing templates.
/// Deterministic and label-preserving.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubParaphraser;

impl StubParaphraser {
    fn swap_synonyms(text: &str) -> String {
        let mut out = text.to_string();
        for (from, to) in STUB_SYNONYMS {
            out = out.replace(from, to);
        }
        out
    }

    pub fn variants(text: &str, n: usize) -> Vec<String> {
        let swapped = Self::swap_synonyms(text);
        let mut out: Vec<String> = Vec::with_capacity(n);
        let mut round = 0usize;
        while out.len() < n {
            for (t, template) in STUB_TEMPLATES.iter().enumerate() {
                if out.len() == n {
                    break;
                }
                let base = if (t + round) % 2 == 0 { &swapped } else { text };
                let mut v = template.replace("{}", base);
                for _ in 0..round {
                    v = format!("Restated: {v}");
                }
                if v != text && !out.contains(&v) {
                    out.push(v);
                }
            }
            round += 1;
        }
        out
    }
}

impl Paraphraser for StubParaphraser {
    fn paraphrase(&self, request: &ParaphraseRequest) -> Result<ParaphraseResponse, ClientError> {
        Ok(ParaphraseResponse { variants: Self::variants(&request.text, request.n) })
    }
}
