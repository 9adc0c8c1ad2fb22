//! Versioned JSON files for trained adapters and similarity indexes.
//!
//! Floats are written with shortest round-trip formatting, so a saved file
//! reloads to bit-identical parameters.

use std::fs;
use std::path::Path;

use geoicl_core::adapter::AdapterParams;
use geoicl_core::featurize::BaseFeaturizerConfig;
use geoicl_core::index::SimilarityIndex;
use geoicl_core::infonce::InfoNceConfig;
use geoicl_core::train::{TrainerConfig, TrainReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::write_atomic;
use crate::error::{Error, Result};

pub const CHECKPOINT_SCHEMA: &str = "geoicl.adapter.v1";
pub const INDEX_SCHEMA: &str = "geoicl.index.v1";

/// Both adapter towers plus everything needed to embed new queries.
///
/// Each tower stores `layers[k] = {d_in, d_out, weights, bias}` with
/// `weights` flattened row-major as `d_in x d_out` (`z = x W + b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub seed: u64,
    pub featurizer: BaseFeaturizerConfig,
    pub trainer: TrainerConfig,
    pub infonce: InfoNceConfig,
    pub text: AdapterParams,
    pub image: AdapterParams,
    /// Training report without wall time, so equal runs give equal files.
    pub report: TrainReport,
}

/// Which tower produced the index rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexFile {
    pub schema: String,
    pub space: Space,
    pub index: SimilarityIndex,
}

fn read_versioned<T: DeserializeOwned>(path: &Path, expected: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    #[derive(Deserialize)]
    struct Header {
        schema: String,
    }
    let header: Header = serde_json::from_str(&text)?;
    if header.schema != expected {
        return Err(Error::Schema { expected: expected.into(), found: header.schema });
    }
    Ok(serde_json::from_str(&text)?)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    Ok(s)
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Self = read_versioned(path, CHECKPOINT_SCHEMA)?;
        for (name, tower) in [("text", &ckpt.text), ("image", &ckpt.image)] {
            let consistent = tower.layers.iter().all(|l| l.weights.len() == l.d_in * l.d_out && l.bias.len() == l.d_out)
                && tower.layers.windows(2).all(|w| w[0].d_out == w[1].d_in);
            if !consistent || !tower.is_finite() {
                return Err(Error::Config(format!("{}: {name} tower has inconsistent or non-finite parameters", path.display())));
            }
        }
        Ok(ckpt)
    }
}

impl IndexFile {
    pub fn new(space: Space, index: SimilarityIndex) -> Self {
        Self { schema: INDEX_SCHEMA.into(), space, index }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: Self = read_versioned(path, INDEX_SCHEMA)?;
        file.index.check()?;
        Ok(file)
    }
}
