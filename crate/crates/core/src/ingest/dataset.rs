use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::image::{load_image, load_mask, resize_bilinear, resize_mask, Image, Mask};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub image: Image,
    pub mask: Option<Mask>,
}

/// How image and mask files are laid out inside a dataset directory.
///
/// `image_pattern` is a glob relative to the dataset directory. The optional
/// `mask_template` names the mask for an image, with `{stem}` replaced by
/// the image's file stem, also relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub image_pattern: String,
    pub mask_template: Option<String>,
}

impl Layout {
    pub fn new(image_pattern: impl Into<String>, mask_template: Option<String>) -> Self {
        Layout {
            image_pattern: image_pattern.into(),
            mask_template,
        }
    }

    /// `images/<id>.png` next to `masks/<id>.png`, the layout this crate exports.
    pub fn exported() -> Self {
        Layout::new("images/*.png", Some("masks/{stem}.png".into()))
    }

    fn mask_path(&self, dir: &Path, image: &Path) -> Option<PathBuf> {
        let template = self.mask_template.as_ref()?;
        let stem = image.file_stem()?.to_string_lossy();
        Some(dir.join(template.replace("{stem}", &stem)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Target `(width, height)`; images are resized bilinearly, masks nearest-neighbor.
    pub resize: Option<(usize, usize)>,
    /// Drop records whose mask has no foreground pixel.
    pub require_tumor: bool,
}

/// Loads every image matching the layout, pairs it with its mask and sorts by id.
pub fn load_dataset(dir: &Path, layout: &Layout, opts: &LoadOptions) -> Result<Vec<DatasetRecord>> {
    if !dir.is_dir() {
        return Err(Error::ingest(dir, "dataset directory does not exist"));
    }
    let pattern = dir.join(&layout.image_pattern);
    let pattern = pattern.to_string_lossy();
    let matched: BTreeSet<PathBuf> = glob::glob(&pattern)
        .map_err(|e| Error::Config(format!("bad image pattern {pattern}: {e}")))?
        .filter_map(|entry| entry.ok())
        .filter(|p| p.is_file())
        .collect();

    // A broad image glob can also match the masks themselves.
    let mask_paths: HashSet<PathBuf> = matched
        .iter()
        .filter_map(|p| layout.mask_path(dir, p))
        .collect();
    let images: Vec<&PathBuf> = matched.iter().filter(|p| !mask_paths.contains(*p)).collect();

    if images.is_empty() {
        warn!("no images matched {pattern}");
        return Ok(Vec::new());
    }

    let mut seen = HashSet::new();
    for p in &images {
        let id = record_id(p)?;
        if !seen.insert(id.clone()) {
            return Err(Error::ingest(*p, format!("duplicate record id {id}")));
        }
    }

    let mut records: Vec<DatasetRecord> = images
        .par_iter()
        .map(|p| load_record(dir, p, layout, opts))
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| a.id.cmp(&b.id));

    if opts.require_tumor {
        let before = records.len();
        records.retain(|r| r.mask.as_ref().is_some_and(|m| !m.is_empty()));
        let dropped = before - records.len();
        if dropped > 0 {
            info!("dropped {dropped} records without tumor pixels");
        }
    }
    info!("loaded {} records from {}", records.len(), dir.display());
    Ok(records)
}

fn record_id(path: &Path) -> Result<String> {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::ingest(path, "cannot derive record id"))
}

fn load_record(dir: &Path, path: &Path, layout: &Layout, opts: &LoadOptions) -> Result<DatasetRecord> {
    let id = record_id(path)?;
    let mut image = load_image(path)?;
    let mut mask = match layout.mask_path(dir, path) {
        None => None,
        Some(mp) if mp.is_file() => {
            let m = load_mask(&mp)?;
            if (m.width(), m.height()) != (image.width(), image.height()) {
                return Err(Error::DimensionMismatch(format!(
                    "image {} is {}x{} but mask {} is {}x{}",
                    path.display(),
                    image.width(),
                    image.height(),
                    mp.display(),
                    m.width(),
                    m.height()
                )));
            }
            Some(m)
        }
        Some(mp) => {
            return Err(Error::ingest(
                path,
                format!("missing mask {}", mp.display()),
            ))
        }
    };
    if let Some((w, h)) = opts.resize {
        image = resize_bilinear(&image, w, h)?;
        mask = mask.map(|m| resize_mask(&m, w, h)).transpose()?;
    }
    Ok(DatasetRecord { id, image, mask })
}

/// Writes records in the [`Layout::exported`] layout.
pub fn write_dataset(records: &[DatasetRecord], dir: &Path) -> Result<()> {
    let images = dir.join("images");
    let masks = dir.join("masks");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    if records.iter().any(|r| r.mask.is_some()) {
        fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;
    }
    records.par_iter().try_for_each(|r| {
        r.image.save_png(&images.join(format!("{}.png", r.id)))?;
        if let Some(m) = &r.mask {
            m.save_png(&masks.join(format!("{}.png", r.id)))?;
        }
        Ok(())
    })
}
