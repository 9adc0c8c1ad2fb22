//! Raw 8-bit rasters and vertical stacking.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("raster must be at least 1x1, got {width}x{height}")]
    EmptyRaster { width: u32, height: u32 },
    #[error("unsupported channel count {0}; expected 1 or 3")]
    Channels(u8),
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    PixelLength { expected: usize, actual: usize },
    #[error("cannot merge rasters with {first} and {other} channels")]
    ChannelMismatch { first: u8, other: u8 },
    #[error("cannot merge an empty list of rasters")]
    EmptyList,
}

/// Row-major 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRaster {
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u8>,
}

impl ImageRaster {
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyRaster { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(ImageError::PixelLength { expected, actual: pixels.len() });
        }
        Ok(Self { width, height, channels, pixels })
    }

    /// A raster where every byte equals `value`.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self, ImageError> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Bytes of pixel `(x, y)`, one per channel.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let start = (y as usize * self.width as usize + x as usize) * c;
        &self.pixels[start..start + c]
    }

    fn row(&self, y: u32) -> &[u8] {
        let stride = self.width as usize * self.channels as usize;
        let start = y as usize * stride;
        &self.pixels[start..start + stride]
    }
}

/// Stack rasters top to bottom.
///
/// The result is as wide as the widest input and as tall as the sum of the
/// input heights. Narrower inputs are left-aligned and the remainder of their
/// rows is filled with `pad_value`. No rescaling is performed.
pub fn merge_vertical(images: &[&ImageRaster], pad_value: u8) -> Result<ImageRaster, ImageError> {
    let first = images.first().ok_or(ImageError::EmptyList)?;
    let channels = first.channels;
    if let Some(other) = images.iter().find(|im| im.channels != channels) {
        return Err(ImageError::ChannelMismatch { first: channels, other: other.channels });
    }
    if images.len() == 1 {
        return Ok((*first).clone());
    }

    let width = images.iter().map(|im| im.width).max().unwrap_or(1);
    let height: u32 = images.iter().map(|im| im.height).sum();
    let stride = width as usize * channels as usize;
    let mut pixels = Vec::with_capacity(stride * height as usize);
    for im in images {
        for y in 0..im.height {
            let row = im.row(y);
            pixels.extend_from_slice(row);
            pixels.resize(pixels.len() + (stride - row.len()), pad_value);
        }
    }
    ImageRaster::new(width, height, channels, pixels)
}
