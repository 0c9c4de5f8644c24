//! Image/mask ingestion, normalization, resizing and dataset splitting.

pub mod dataset;
pub mod image;
pub mod matrix;
pub mod split;

pub use dataset::{load_dataset, write_dataset, DatasetRecord, Layout, LoadOptions};
pub use image::{load_image, load_mask, resize_bilinear, resize_mask, Image, Mask};
pub use matrix::{flatten, unflatten_images, unflatten_masks, Channel, DataMatrix, ScalarWidth};
pub use split::{split_dataset, split_ids, Split, SplitAssignment, SplitRatios, DEFAULT_RATIOS, DEFAULT_SEED};

/// Parses `256x256` style sizes into `(width, height)`.
pub fn parse_size(s: &str) -> crate::Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| crate::Error::InvalidArgument(format!("size {s:?} is not WxH")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| crate::Error::InvalidArgument(format!("size {s:?} is not WxH")))
    };
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err(crate::Error::InvalidArgument(format!("size {s:?} has a zero side")));
    }
    Ok((w, h))
}
