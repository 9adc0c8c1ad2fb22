//! Pipeline configuration: one TOML or JSON file drives every stage, command
//! line flags override individual fields, and a few environment variables
//! override backend settings.
//!
//! ```toml
//! [paths]
//! data = "data/geomath.jsonl"
//! out_dir = "out"
//!
//! [trainer]
//! epochs = 100
//! seed = 7
//!
//! [meta]
//! k = 1
//!
//! [backend]
//! url = "http://localhost:8000"
//! concurrency = 4
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use geoicl_core::compose::MetaConfig;
use geoicl_core::eval::EvalConfig;
use geoicl_core::featurize::BaseFeaturizerConfig;
use geoicl_core::infonce::InfoNceConfig;
use geoicl_core::train::TrainerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::RetryPolicy;

pub const CONFIG_SCHEMA: &str = "geoicl.config.v1";
pub const ENV_BACKEND_URL: &str = "GEOICL_BACKEND_URL";
pub const ENV_PARAPHRASE_URL: &str = "GEOICL_PARAPHRASE_URL";
pub const ENV_TIMEOUT_SECS: &str = "GEOICL_TIMEOUT_SECS";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    /// Root for relative image paths; defaults to the dataset's directory.
    pub images: Option<PathBuf>,
    pub normalizer_table: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub url: Option<String>,
    pub paraphrase_url: Option<String>,
    pub timeout_secs: f64,
    /// Extra attempts after a transient failure.
    pub retries: u32,
    /// First retry delay; doubles per attempt.
    pub backoff_ms: u64,
    /// Requests in flight at once.
    pub concurrency: usize,
    /// Seed of the random-guess mock.
    pub mock_seed: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let retry = RetryPolicy::default();
        Self {
            url: None,
            paraphrase_url: None,
            timeout_secs: retry.timeout_secs,
            retries: retry.retries,
            backoff_ms: retry.backoff_ms,
            concurrency: 4,
            mock_seed: 0,
        }
    }
}

impl BackendConfig {
    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy { timeout_secs: self.timeout_secs, retries: self.retries, backoff_ms: self.backoff_ms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub variants: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { variants: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema: String,
    pub paths: Paths,
    /// Channels images are converted to on load (1 or 3) so merged rasters
    /// are uniform.
    pub image_channels: u8,
    pub featurizer: BaseFeaturizerConfig,
    pub trainer: TrainerConfig,
    pub infonce: InfoNceConfig,
    pub meta: MetaConfig,
    pub eval: EvalConfig,
    pub augment: AugmentConfig,
    pub backend: BackendConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA.into(),
            paths: Paths::default(),
            image_channels: 3,
            featurizer: BaseFeaturizerConfig::default(),
            trainer: TrainerConfig::default(),
            infonce: InfoNceConfig::default(),
            meta: MetaConfig::default(),
            eval: EvalConfig::default(),
            augment: AugmentConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parse TOML, or JSON when `json` is set.
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let cfg: Self = if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let json = path.extension().is_some_and(|e| e == "json");
        let mut cfg = Self::parse(&text, json)?;
        if let Some(dir) = path.parent() {
            cfg.paths.rebase(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Schema { expected: CONFIG_SCHEMA.into(), found: self.schema.clone() });
        }
        if !matches!(self.image_channels, 1 | 3) {
            return Err(Error::Config(format!("image_channels must be 1 or 3, got {}", self.image_channels)));
        }
        if self.backend.concurrency == 0 {
            return Err(Error::Config("backend.concurrency must be at least 1".into()));
        }
        if !(self.backend.timeout_secs > 0.0 && self.backend.timeout_secs.is_finite()) {
            return Err(Error::Config("backend.timeout_secs must be positive".into()));
        }
        self.featurizer.validate()?;
        self.trainer.validate()?;
        self.infonce.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Apply `GEOICL_BACKEND_URL`, `GEOICL_PARAPHRASE_URL` and
    /// `GEOICL_TIMEOUT_SECS` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(url) = lookup(ENV_BACKEND_URL) {
            self.backend.url = Some(url);
        }
        if let Some(url) = lookup(ENV_PARAPHRASE_URL) {
            self.backend.paraphrase_url = Some(url);
        }
        if let Some(t) = lookup(ENV_TIMEOUT_SECS) {
            let secs: f64 = t.trim().parse().map_err(|_| Error::Config(format!("{ENV_TIMEOUT_SECS}={t} is not a number")))?;
            self.backend.timeout_secs = secs;
        }
        self.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

impl Paths {
    fn rebase(&mut self, dir: &Path) {
        for p in [&mut self.data, &mut self.images, &mut self.normalizer_table, &mut self.checkpoint, &mut self.index, &mut self.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = PipelineConfig::parse("[trainer]\nepochs = 7\n[meta]\nk = 2\n", false).unwrap();
        assert_eq!(cfg.trainer.epochs, 7);
        assert_eq!(cfg.trainer.batch_size, TrainerConfig::default().batch_size);
        assert_eq!(cfg.meta.k, 2);
        assert_eq!(cfg.meta.pad_value, 255);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&cfg.to_toml().unwrap(), false).unwrap(), cfg);
    }

    #[test]
    fn env_overrides() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_env(|k| match k {
            ENV_BACKEND_URL => Some("http://model:9000".into()),
            ENV_TIMEOUT_SECS => Some("2.5".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.backend.url.as_deref(), Some("http://model:9000"));
        assert_eq!(cfg.backend.timeout_secs, 2.5);
        assert!(cfg.apply_env(|k| (k == ENV_TIMEOUT_SECS).then(|| "soon".into())).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::parse("[paths]\ndatta = \"x\"\n", false).is_err());
        assert!(PipelineConfig::parse("image_channels = 2\n", false).is_err());
    }
}
