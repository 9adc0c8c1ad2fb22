//! PNG codec for [`ImageRaster`] and an on-disk image store.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use geoicl_core::compose::ImageStore;
use geoicl_core::record::{GeoRecord, ImageRef};
use geoicl_core::ImageRaster;
use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};

/// Decode an 8-bit PNG. Grayscale stays one channel; anything with color
/// becomes RGB. Alpha is dropped.
pub fn decode(bytes: &[u8]) -> Result<ImageRaster> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::Png(e.to_string()))?;
    let raster = if img.color().has_color() {
        let rgb = img.to_rgb8();
        ImageRaster::new(rgb.width(), rgb.height(), 3, rgb.into_raw())
    } else {
        let gray = img.to_luma8();
        ImageRaster::new(gray.width(), gray.height(), 1, gray.into_raw())
    };
    Ok(raster?)
}

pub fn encode(raster: &ImageRaster) -> Result<Vec<u8>> {
    let (w, h) = (raster.width(), raster.height());
    let pixels = raster.pixels().to_vec();
    let img = match raster.channels() {
        1 => image::GrayImage::from_raw(w, h, pixels).map(DynamicImage::ImageLuma8),
        _ => image::RgbImage::from_raw(w, h, pixels).map(DynamicImage::ImageRgb8),
    }
    .ok_or_else(|| Error::Png("raster size does not match pixel buffer".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).map_err(|e| Error::Png(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn read(path: &Path) -> Result<ImageRaster> {
    decode(&std::fs::read(path).map_err(Error::io(path))?)
}

/// Write a PNG, creating parent directories as needed.
pub fn write(path: &Path, raster: &ImageRaster) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    std::fs::write(path, encode(raster)?).map_err(Error::io(path))
}

pub fn to_base64(raster: &ImageRaster) -> Result<String> {
    Ok(BASE64.encode(encode(raster)?))
}

pub fn from_base64(payload: &str) -> Result<ImageRaster> {
    decode(&BASE64.decode(payload.trim()).map_err(|e| Error::Png(format!("base64: {e}")))?)
}

/// Convert between one and three channels. Gray to RGB replicates; RGB to
/// gray takes the rounded channel mean.
pub fn convert_channels(raster: ImageRaster, channels: u8) -> Result<ImageRaster> {
    if raster.channels() == channels {
        return Ok(raster);
    }
    let (w, h) = (raster.width(), raster.height());
    let pixels = match channels {
        3 => raster.pixels().iter().flat_map(|&v| [v, v, v]).collect(),
        1 => raster
            .pixels()
            .chunks_exact(3)
            .map(|p| ((u16::from(p[0]) + u16::from(p[1]) + u16::from(p[2]) + 1) / 3) as u8)
            .collect(),
        c => return Err(Error::Png(format!("unsupported channel count {c}"))),
    };
    Ok(ImageRaster::new(w, h, channels, pixels)?)
}

/// Resolves record images relative to a root directory (or decodes inline
/// payloads), optionally converting to a fixed channel count so rasters of
/// mixed origin can be merged. Decoded rasters are cached per reference.
#[derive(Debug)]
pub struct DiskImages {
    root: PathBuf,
    channels: Option<u8>,
    cache: Mutex<BTreeMap<ImageRef, ImageRaster>>,
}

impl DiskImages {
    pub fn new(root: impl Into<PathBuf>, channels: Option<u8>) -> Self {
        Self { root: root.into(), channels, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        self.root.join(path)
    }

    pub fn load_ref(&self, image: &ImageRef) -> Result<ImageRaster> {
        if let Some(hit) = self.cache.lock().expect("image cache poisoned").get(image) {
            return Ok(hit.clone());
        }
        let raster = match image {
            ImageRef::Path(p) => read(&self.resolve(p))?,
            ImageRef::Inline(b) => from_base64(b)?,
        };
        let raster = match self.channels {
            Some(c) => convert_channels(raster, c)?,
            None => raster,
        };
        self.cache.lock().expect("image cache poisoned").insert(image.clone(), raster.clone());
        Ok(raster)
    }
}

impl ImageStore for DiskImages {
    fn load(&self, record: &GeoRecord) -> std::result::Result<ImageRaster, String> {
        self.load_ref(&record.image).map_err(|e| e.to_string())
    }
}
