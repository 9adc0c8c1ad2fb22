//! JSON-lines dataset files.
//!
//! One record per line. Blank lines are ignored. Image paths are resolved
//! relative to an image root, by default the dataset file's directory.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use geoicl_core::record::{Dataset, GeoRecord, ImageRef};
use serde::Serialize;

use crate::error::{Error, Result};

pub const DATASET_SCHEMA: &str = "geoicl.dataset.v1";

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Skip and report bad lines instead of failing on the first one.
    pub lenient: bool,
    /// Directory image paths are relative to; defaults to the file's parent.
    pub image_root: Option<PathBuf>,
    /// Do not check that referenced images exist.
    pub skip_image_check: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    /// Lines dropped under lenient loading.
    pub skipped: Vec<Skipped>,
    pub image_root: PathBuf,
}

pub fn default_image_root(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn check_schema(schema_version: &str) -> Result<()> {
    if schema_version != DATASET_SCHEMA {
        return Err(Error::Schema { expected: DATASET_SCHEMA.into(), found: schema_version.into() });
    }
    Ok(())
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

fn check_image(record: &GeoRecord, line: usize, root: &Path) -> Result<()> {
    let missing = |reason: String| Error::MissingImage { id: record.id.clone(), line, reason };
    match &record.image {
        ImageRef::Path(p) => {
            let full = root.join(p);
            if !full.is_file() {
                return Err(missing(format!("no file at {}", full.display())));
            }
        }
        ImageRef::Inline(b) => {
            let bytes = BASE64.decode(b.trim()).map_err(|e| missing(format!("inline payload is not base64: {e}")))?;
            if !bytes.starts_with(PNG_SIGNATURE) {
                return Err(missing("inline payload is not a PNG".into()));
            }
        }
    }
    Ok(())
}

/// Parse dataset text. `root` is used for image checks unless disabled.
pub fn parse_dataset(text: &str, schema_version: &str, root: &Path, opts: &LoadOptions) -> Result<(Dataset, Vec<Skipped>)> {
    check_schema(schema_version)?;
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    let mut skipped = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<GeoRecord>(raw)
            .map_err(|e| Error::MalformedRecord { line, reason: e.to_string() })
            .and_then(|r| {
                if seen.contains(&r.id) {
                    return Err(Error::DuplicateId(r.id));
                }
                if !opts.skip_image_check {
                    check_image(&r, line, root)?;
                }
                Ok(r)
            });
        match parsed {
            Ok(r) => {
                seen.insert(r.id.clone());
                records.push(r);
            }
            Err(e) if opts.lenient => {
                log::warn!("skipping line {line}: {e}");
                skipped.push(Skipped { line, reason: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    let dataset = Dataset::new(records).map_err(|e| match e {
        geoicl_core::record::DatasetError::DuplicateId(id) => Error::DuplicateId(id),
    })?;
    Ok((dataset, skipped))
}

pub fn load_dataset(path: &Path, schema_version: &str, opts: &LoadOptions) -> Result<Loaded> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let image_root = opts.image_root.clone().unwrap_or_else(|| default_image_root(path));
    let (dataset, skipped) = parse_dataset(&text, schema_version, &image_root, opts)?;
    log::info!("loaded {} records from {}", dataset.len(), path.display());
    Ok(Loaded { dataset, skipped, image_root })
}

/// Fail-fast load with default options.
pub fn load(path: &Path) -> Result<Dataset> {
    load_dataset(path, DATASET_SCHEMA, &LoadOptions::default()).map(|l| l.dataset)
}

pub fn render_dataset<'a>(records: impl IntoIterator<Item = &'a GeoRecord>) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_atomic(path, render_dataset(dataset.iter())?.as_bytes())
}

/// Write through a sibling temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(Error::io(&tmp))?;
    f.write_all(bytes).map_err(Error::io(&tmp))?;
    f.sync_all().map_err(Error::io(&tmp))?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str) -> String {
        let png = crate::png::to_base64(&geoicl_core::ImageRaster::new(1, 1, 1, vec![0]).unwrap()).unwrap();
        format!(
            r#"{{"id":"{id}","question":"Find x.","image":"data:image/png;base64,{png}","steps":[],"answer":{{"kind":"numeric","numeric":3.0}},"qtype":"cloze","split":"train","source":"GeoMath","lang":"en"}}"#
        )
    }

    #[test]
    fn duplicate_reported() {
        let text = [line("q0"), line("q1"), line("q2"), line("q1")].join("\n");
        let err = parse_dataset(&text, DATASET_SCHEMA, Path::new("."), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "q1"));
    }

    #[test]
    fn malformed_line_number() {
        let text = [line("q0"), "{not json".into()].join("\n");
        let err = parse_dataset(&text, DATASET_SCHEMA, Path::new("."), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 2, .. }));
        let lenient = LoadOptions { lenient: true, ..Default::default() };
        let (ds, skipped) = parse_dataset(&text, DATASET_SCHEMA, Path::new("."), &lenient).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(skipped[0].line, 2);
    }

    #[test]
    fn wrong_schema() {
        let err = parse_dataset("", "geoicl.dataset.v0", Path::new("."), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
    }
}
