//! Core of a retrieval-augmented in-context learning pipeline for
//! multimodal geometry question answering.
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std` (only `alloc` is required). File formats, PNG decoding,
//! HTTP backends and the command line live in the `geoicl` crate.
//!
//! The pipeline stages map onto modules:
//!
//! - [`record`]: geometry problem records, validation, splits and statistics.
//! - [`normalize`]: math symbol to word rewriting.
//! - [`featurize`] and [`adapter`]: frozen base featurizers and the trainable
//!   three-layer adapter towers.
//! - [`infonce`] and [`train`]: the contrastive objective, its analytic
//!   gradients and the retriever training loop.
//! - [`index`]: exact cosine top-k search with self-exclusion.
//! - [`image`] and [`compose`]: vertical image merging and prompt composition
//!   for meta-training and inference.
//! - [`augment`]: paraphrase augmentation with a label-preserving validator.
//! - [`grade`], [`eval`] and [`finetune`]: answer extraction, the evaluation
//!   harness, mock backends and the emitted fine-tune configuration.
#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod adapter;
pub mod augment;
pub mod compose;
pub mod eval;
pub mod featurize;
pub mod finetune;
pub mod grade;
pub mod image;
pub mod index;
pub mod infonce;
pub mod normalize;
pub mod record;
pub mod stats;
pub mod train;

pub use adapter::{AdapterParams, Embedding};
pub use image::ImageRaster;
pub use record::{AnswerValue, Dataset, GeoRecord, QuestionType, Split};
