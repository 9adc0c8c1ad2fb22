//! Frozen base featurizers feeding the adapter towers.
//!
//! Text: hashed character n-gram counts over the lowercased, space-padded
//! question. Image: per-cell mean and standard deviation of intensity on a
//! `G x G` grid. Both are L2-normalized.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::Embedding;
use crate::image::ImageRaster;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeaturizeError {
    #[error("text is empty")]
    EmptyText,
    #[error("bucket count {0} is below the minimum of 256")]
    Buckets(usize),
    #[error("grid size {0} is below the minimum of 4")]
    Grid(usize),
    #[error("n-gram sizes must be a non-empty subset of {{2, 3}}")]
    NgramSizes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// Average channels into one intensity plane.
    Gray,
    /// Three planes; gray rasters are replicated.
    Rgb,
}

impl ChannelMode {
    pub fn planes(self) -> usize {
        match self {
            ChannelMode::Gray => 1,
            ChannelMode::Rgb => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextFeaturizer {
    pub buckets: usize,
    pub ngrams: Vec<usize>,
}

impl Default for TextFeaturizer {
    fn default() -> Self {
        Self { buckets: 512, ngrams: vec![2, 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageFeaturizer {
    pub grid: usize,
    pub channels: ChannelMode,
}

impl Default for ImageFeaturizer {
    fn default() -> Self {
        Self { grid: 8, channels: ChannelMode::Gray }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseFeaturizerConfig {
    pub text: TextFeaturizer,
    pub image: ImageFeaturizer,
}

impl BaseFeaturizerConfig {
    pub fn validate(&self) -> Result<(), FeaturizeError> {
        self.text.validate()?;
        self.image.validate()
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Scale to unit L2 norm; the zero vector is returned unchanged.
pub fn l2_normalize(v: &mut [f64]) {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

impl TextFeaturizer {
    pub fn validate(&self) -> Result<(), FeaturizeError> {
        if self.buckets < 256 {
            return Err(FeaturizeError::Buckets(self.buckets));
        }
        if self.ngrams.is_empty() || self.ngrams.iter().any(|n| !(2..=3).contains(n)) {
            return Err(FeaturizeError::NgramSizes);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.buckets
    }

    /// Hashed n-gram count vector of `text`, L2-normalized.
    pub fn embed(&self, text: &str) -> Result<Embedding, FeaturizeError> {
        self.validate()?;
        if text.trim().is_empty() {
            return Err(FeaturizeError::EmptyText);
        }
        let mut chars = vec![' '];
        chars.extend(text.chars().flat_map(char::to_lowercase));
        chars.push(' ');

        let mut counts = vec![0.0; self.buckets];
        let mut bytes = Vec::with_capacity(16);
        for &n in &self.ngrams {
            for gram in chars.windows(n) {
                bytes.clear();
                bytes.push(n as u8);
                for c in gram {
                    let mut buf = [0u8; 4];
                    bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                }
                let bucket = (fnv1a(bytes.iter().copied()) % self.buckets as u64) as usize;
                counts[bucket] += 1.0;
            }
        }
        l2_normalize(&mut counts);
        Ok(Embedding::new(counts))
    }
}

impl ImageFeaturizer {
    pub fn validate(&self) -> Result<(), FeaturizeError> {
        if self.grid < 4 {
            return Err(FeaturizeError::Grid(self.grid));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.grid * self.grid * self.channels.planes() * 2
    }

    /// Grid cell statistics before normalization, laid out as
    /// `[cell_row][cell_col][plane][mean, std]` with intensities in `[0, 1]`.
    pub fn raw_features(&self, raster: &ImageRaster) -> Result<Vec<f64>, FeaturizeError> {
        self.validate()?;
        let g = self.grid;
        let planes = self.channels.planes();
        let (w, h) = (raster.width() as usize, raster.height() as usize);
        let src_channels = raster.channels() as usize;
        let mut out = Vec::with_capacity(self.dim());

        let span = |cell: usize, extent: usize| {
            let start = cell * extent / g;
            let end = ((cell + 1) * extent / g).max(start + 1).min(extent);
            (start.min(extent - 1), end)
        };

        for cr in 0..g {
            let (y0, y1) = span(cr, h);
            for cc in 0..g {
                let (x0, x1) = span(cc, w);
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                for p in 0..planes {
                    let value = |x: usize, y: usize| {
                        let px = raster.pixel(x as u32, y as u32);
                        let v = match (self.channels, src_channels) {
                            (_, 1) => f64::from(px[0]),
                            (ChannelMode::Gray, _) => px.iter().map(|&b| f64::from(b)).sum::<f64>() / 3.0,
                            (ChannelMode::Rgb, _) => f64::from(px[p]),
                        };
                        v / 255.0
                    };
                    let cells = || (y0..y1).flat_map(move |y| (x0..x1).map(move |x| (x, y)));
                    let mean = cells().map(|(x, y)| value(x, y)).sum::<f64>() / n;
                    let var = cells()
                        .map(|(x, y)| {
                            let d = value(x, y) - mean;
                            d * d
                        })
                        .sum::<f64>()
                        / n;
                    out.push(mean);
                    out.push(libm::sqrt(var));
                }
            }
        }
        Ok(out)
    }

    /// Grid statistics, L2-normalized. An all-black raster yields the zero vector.
    pub fn embed(&self, raster: &ImageRaster) -> Result<Embedding, FeaturizeError> {
        let mut v = self.raw_features(raster)?;
        l2_normalize(&mut v);
        Ok(Embedding::new(v))
    }
}
