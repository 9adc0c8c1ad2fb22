//! File formats, PNG images, HTTP backends and pipeline orchestration for
//! `geoicl-core`. The `geoicl` binary exposes each stage as a subcommand.

pub mod checkpoint;
pub mod concurrent;
pub mod config;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod http;
pub mod pipeline;
pub mod png;
pub mod synth;

pub use error::{Error, Result};
