//! Exact cosine top-k search.
//!
//! Rows are unit-norm embeddings stored contiguously in ascending id order.
//! Results are sorted by descending cosine with ties broken by ascending id,
//! so rankings are fully deterministic.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{dot, Embedding};

/// Allowed deviation of a row norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("dimension mismatch for `{id}`: expected {expected}, got {actual}")]
    DimMismatch { id: String, expected: usize, actual: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("embedding `{id}` has norm {norm}, expected 1")]
    NotUnitNorm { id: String, norm: f64 },
    #[error("index has no candidates for this query")]
    EmptyIndex,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the {available} available candidates")]
    KTooLarge { k: usize, available: usize },
    #[error("{queries} queries but {exclusions} exclusions")]
    ExclusionLength { queries: usize, exclusions: usize },
    #[error("query is the zero vector or non-finite")]
    BadQuery,
    #[error("unknown id `{0}`")]
    UnknownId(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityIndex {
    ids: Vec<String>,
    dim: usize,
    /// Row-major `ids.len() x dim`.
    rows: Vec<f64>,
}

/// One search hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub cosine: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryOptions<'a> {
    /// Id never returned (the query record itself).
    pub exclude: Option<&'a str>,
    /// Error instead of truncating when fewer than `k` candidates exist.
    pub strict: bool,
}

fn rank_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

impl SimilarityIndex {
    /// Build from `(id, embedding)` entries. Rows are sorted by id.
    pub fn build(entries: impl IntoIterator<Item = (String, Embedding)>) -> Result<Self, IndexError> {
        let mut entries: Vec<(String, Embedding)> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(IndexError::DuplicateId(w[0].0.clone()));
        }
        let dim = entries.first().map_or(0, |e| e.1.dim());
        let mut ids = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len() * dim);
        for (id, e) in entries {
            if e.dim() != dim {
                return Err(IndexError::DimMismatch { id, expected: dim, actual: e.dim() });
            }
            let norm = e.norm();
            if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
                return Err(IndexError::NotUnitNorm { id, norm });
            }
            rows.extend_from_slice(e.values());
            ids.push(id);
        }
        Ok(Self { ids, dim, rows })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|probe| probe.as_str().cmp(id)).ok()
    }

    pub fn row(&self, id: &str) -> Option<Embedding> {
        self.position(id).map(|i| Embedding::new(self.row_slice(i).to_vec()))
    }

    fn row_slice(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Validate the persisted invariants after deserialization.
    pub fn check(&self) -> Result<(), IndexError> {
        let entries = (0..self.len()).map(|i| (self.ids[i].clone(), Embedding::new(self.row_slice(i).to_vec())));
        let rebuilt = Self::build(entries)?;
        if rebuilt.ids != self.ids || self.rows.len() != self.len() * self.dim {
            return Err(IndexError::DimMismatch { id: String::from("<rows>"), expected: self.len() * self.dim, actual: self.rows.len() });
        }
        Ok(())
    }

    fn scores(&self, query: &Embedding) -> Result<Vec<(f64, usize)>, IndexError> {
        if query.dim() != self.dim {
            return Err(IndexError::DimMismatch { id: String::from("<query>"), expected: self.dim, actual: query.dim() });
        }
        let qn = query.norm();
        if !(qn > 0.0 && qn.is_finite()) {
            return Err(IndexError::BadQuery);
        }
        let q = query.values();
        Ok((0..self.len()).map(|i| (dot(self.row_slice(i), q) / qn, i)).collect())
    }

    /// Every row ranked by cosine to `query`, best first.
    pub fn ranked(&self, query: &Embedding) -> Result<Vec<Hit>, IndexError> {
        let mut scored = self.scores(query)?;
        scored.sort_by(rank_order);
        Ok(scored.into_iter().map(|(c, i)| Hit { id: self.ids[i].clone(), cosine: c }).collect())
    }

    /// The `k` rows most similar to `query`.
    pub fn top_k(&self, query: &Embedding, k: usize, opts: QueryOptions<'_>) -> Result<Vec<Hit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        let mut scored = self.scores(query)?;
        if let Some(ex) = opts.exclude {
            if let Some(pos) = self.position(ex) {
                scored.retain(|&(_, i)| i != pos);
            }
        }
        if scored.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if opts.strict && k > scored.len() {
            return Err(IndexError::KTooLarge { k, available: scored.len() });
        }
        let take = k.min(scored.len());
        if take < scored.len() {
            scored.select_nth_unstable_by(take - 1, rank_order);
            scored.truncate(take);
        }
        scored.sort_by(rank_order);
        Ok(scored.into_iter().map(|(c, i)| Hit { id: self.ids[i].clone(), cosine: c }).collect())
    }

    /// [`top_k`](Self::top_k) for each query; `exclusions` must be empty or
    /// aligned with `queries`.
    pub fn top_k_batch(
        &self,
        queries: &[Embedding],
        k: usize,
        exclusions: &[Option<&str>],
        strict: bool,
    ) -> Result<Vec<Vec<Hit>>, IndexError> {
        if !exclusions.is_empty() && exclusions.len() != queries.len() {
            return Err(IndexError::ExclusionLength { queries: queries.len(), exclusions: exclusions.len() });
        }
        queries
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let exclude = exclusions.get(i).copied().flatten();
                self.top_k(q, k, QueryOptions { exclude, strict })
            })
            .collect()
    }
}
