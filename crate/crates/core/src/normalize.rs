//! Rewrites math symbols into plain words.
//!
//! Text encoders with word-piece vocabularies have no token for `△` or `⊥`,
//! so questions are rewritten (`△ABC` becomes `triangle ABC`) before they are
//! featurized or placed in prompts.
//!
//! Matching is literal, longest-match-first and strictly left to right in a
//! single pass. A replacement is always separated from adjacent non-space text
//! by one space, which keeps the rewrite idempotent: patterns never contain
//! whitespace and replacements never contain a pattern, so the output cannot
//! contain a new match.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::record::GeoRecord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("line {line}: empty pattern")]
    EmptyPattern { line: usize },
    #[error("line {line}: pattern `{pattern}` contains whitespace")]
    WhitespaceInPattern { line: usize, pattern: String },
    #[error("line {line}: replacement `{replacement}` must be printable ASCII words separated by single spaces")]
    BadReplacement { line: usize, replacement: String },
    #[error("line {line}: duplicate pattern `{pattern}`")]
    DuplicatePattern { line: usize, pattern: String },
    #[error("replacement `{replacement}` contains pattern `{pattern}`")]
    ReplacementContainsPattern { replacement: String, pattern: String },
    #[error("line {line}: expected `pattern<TAB>replacement`")]
    Columns { line: usize },
}

/// Ordered symbol-to-word mapping, longest pattern first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    entries: Vec<(String, String)>,
}

const DEFAULT_ENTRIES: &[(&str, &str)] = &[
    ("△", "triangle"),
    ("⊥", "perpendicular to"),
    ("∠", "angle"),
    ("∥", "parallel to"),
    ("≌", "congruent to"),
    ("∽", "similar to"),
    ("°", "degrees"),
    ("π", "pi"),
    ("√", "square root of"),
    ("≈", "approximately equal to"),
    ("≤", "less than or equal to"),
    ("≥", "greater than or equal to"),
    ("²", "squared"),
    ("³", "cubed"),
    ("≠", "not equal to"),
    ("⊙", "circle"),
    ("∵", "because"),
    ("∴", "therefore"),
    ("\\triangle", "triangle"),
    ("\\perp", "perpendicular to"),
    ("\\angle", "angle"),
    ("\\parallel", "parallel to"),
    ("\\cong", "congruent to"),
    ("\\sim", "similar to"),
    ("\\sqrt", "square root of"),
    ("\\pi", "pi"),
];

impl Default for SymbolTable {
    fn default() -> Self {
        let entries = DEFAULT_ENTRIES.iter().map(|(p, r)| (p.to_string(), r.to_string()));
        Self::new(entries).expect("default table is valid")
    }
}

fn valid_replacement(r: &str) -> bool {
    !r.is_empty()
        && r.split(' ').all(|w| !w.is_empty() && w.bytes().all(|b| b.is_ascii_graphic()))
}

impl SymbolTable {
    /// Build a table from `(pattern, replacement)` pairs.
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self, TableError> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, (pattern, replacement)) in pairs.into_iter().enumerate() {
            let line = i + 1;
            if pattern.is_empty() {
                return Err(TableError::EmptyPattern { line });
            }
            if pattern.chars().any(char::is_whitespace) {
                return Err(TableError::WhitespaceInPattern { line, pattern });
            }
            if !valid_replacement(&replacement) {
                return Err(TableError::BadReplacement { line, replacement });
            }
            if entries.iter().any(|(p, _)| *p == pattern) {
                return Err(TableError::DuplicatePattern { line, pattern });
            }
            entries.push((pattern, replacement));
        }
        for (_, replacement) in &entries {
            if let Some((pattern, _)) = entries.iter().find(|(p, _)| replacement.contains(p.as_str())) {
                return Err(TableError::ReplacementContainsPattern {
                    replacement: replacement.clone(),
                    pattern: pattern.clone(),
                });
            }
        }
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(Self { entries })
    }

    /// Parse a two-column TSV (`pattern<TAB>replacement`). Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, TableError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(p), Some(r), None) => pairs.push((p.to_string(), r.trim().to_string())),
                _ => return Err(TableError::Columns { line: i + 1 }),
            }
        }
        Self::new(pairs)
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn match_at(&self, rest: &str) -> Option<(&str, &str)> {
        self.entries
            .iter()
            .find(|(p, _)| rest.starts_with(p.as_str()))
            .map(|(p, r)| (p.as_str(), r.as_str()))
    }

    /// Rewrite every table pattern in `text`.
    pub fn normalize(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len() + text.len() / 2);
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            if let Some((pattern, replacement)) = self.match_at(rest) {
                if out.chars().next_back().is_some_and(|c| !c.is_whitespace()) {
                    out.push(' ');
                }
                out.push_str(replacement);
                pos += pattern.len();
                if text[pos..].chars().next().is_some_and(|c| !c.is_whitespace()) {
                    out.push(' ');
                }
            } else {
                let c = rest.chars().next().expect("pos is on a char boundary");
                if !c.is_ascii() {
                    log::debug!("unmapped symbol {c:?}");
                }
                out.push(c);
                pos += c.len_utf8();
            }
        }
        out
    }

    /// Non-ASCII codepoints that survive normalization, with occurrence counts,
    /// most frequent first (ties by codepoint).
    pub fn audit_vocabulary<'a>(&self, records: impl IntoIterator<Item = &'a GeoRecord>) -> Vec<(char, usize)> {
        let mut counts: BTreeMap<char, usize> = BTreeMap::new();
        for r in records {
            for c in self.normalize(&r.question_raw).chars().filter(|c| !c.is_ascii()) {
                *counts.entry(c).or_default() += 1;
            }
        }
        let mut out: Vec<(char, usize)> = counts.into_iter().collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}

/// Normalize with the default table.
pub fn normalize(text: &str) -> String {
    SymbolTable::default().normalize(text)
}
