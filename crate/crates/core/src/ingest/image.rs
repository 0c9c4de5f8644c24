use std::path::Path;

use image::{DynamicImage, GrayImage};

use crate::error::{Error, Result};

/// Grayscale image with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} image needs {} values, got {}",
                width,
                height,
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "image intensity {v} outside [0, 1]"
            )));
        }
        Ok(Image {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Image::new(width, height, vec![value; width * height])
    }

    /// Builds an image from 8-bit intensities scaled by `1/255`.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Image::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    /// Clamps to `[0, 1]` before building; used for PCA reconstructions.
    pub fn from_unclamped(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        Image::new(
            width,
            height,
            values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Rounds to the nearest 8-bit level.
    pub fn to_u8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Round-trips through 8-bit storage, the state a PNG export leaves behind.
    pub fn quantized(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            values: self.to_u8().into_iter().map(|b| f64::from(b) / 255.0).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_gray_png(path, self.width, self.height, self.to_u8())
    }
}

/// Binary segmentation mask, `0` or `1` per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} mask needs {} values, got {}",
                width,
                height,
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("mask values must be 0 or 1".into()));
        }
        Ok(Mask {
            width,
            height,
            values,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            values: vec![0; width * height],
        }
    }

    /// Pixels at or above `0.5` become foreground.
    pub fn from_image(img: &Image) -> Self {
        Mask {
            width: img.width,
            height: img.height,
            values: img.values.iter().map(|&v| u8::from(v >= 0.5)).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn foreground(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    /// Writes the mask as 0/255 grayscale.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_gray_png(
            path,
            self.width,
            self.height,
            self.values.iter().map(|&v| v * 255).collect(),
        )
    }
}

fn save_gray_png(path: &Path, width: usize, height: usize, bytes: Vec<u8>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let buf = GrayImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| Error::DimensionMismatch(format!("{width}x{height} buffer")))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::ingest(path, e.to_string()))
}

fn luma(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)) / 255.0
}

/// Loads an 8-bit grayscale or RGB raster into `[0, 1]`.
///
/// RGB is reduced with luma weights 0.299 / 0.587 / 0.114; alpha channels are
/// ignored. 16-bit and floating-point rasters are rejected.
pub fn load_image(path: &Path) -> Result<Image> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::ingest(path, e.to_string()))?
        .with_guessed_format()
        .map_err(|e| Error::ingest(path, e.to_string()))?;
    let decoded = reader
        .decode()
        .map_err(|e| Error::ingest(path, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let values: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect(),
        other => {
            return Err(Error::ingest(
                path,
                format!("unsupported bit depth ({:?})", other.color()),
            ))
        }
    };
    Image::new(w, h, values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    load_image(path).map(|img| Mask::from_image(&img))
}

fn check_target(w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target must be at least 1x1, got {w}x{h}"
        )));
    }
    Ok(())
}

/// Source coordinate for output pixel `i` under half-pixel centers
/// (`align_corners = false`).
fn source_coord(i: usize, in_len: usize, out_len: usize) -> f64 {
    let scale = in_len as f64 / out_len as f64;
    ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64)
}

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &Image, w: usize, h: usize) -> Result<Image> {
    check_target(w, h)?;
    if w == img.width && h == img.height {
        return Ok(img.clone());
    }
    let xs: Vec<(usize, usize, f64)> = (0..w)
        .map(|x| {
            let sx = source_coord(x, img.width, w);
            let x0 = sx.floor() as usize;
            (x0, (x0 + 1).min(img.width - 1), sx - x0 as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let sy = source_coord(y, img.height, h);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = sy - y0 as f64;
        for &(x0, x1, fx) in &xs {
            let top = lerp(img.get(x0, y0), img.get(x1, y0), fx);
            let bottom = lerp(img.get(x0, y1), img.get(x1, y1), fx);
            out.push(lerp(top, bottom, fy).clamp(0.0, 1.0));
        }
    }
    Image::new(w, h, out)
}

// a + (b - a) t keeps constant inputs exact.
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Nearest-neighbor resize followed by re-thresholding, so masks stay binary.
pub fn resize_mask(mask: &Mask, w: usize, h: usize) -> Result<Mask> {
    check_target(w, h)?;
    let nearest = |i: usize, in_len: usize, out_len: usize| {
        (((i as f64 + 0.5) * in_len as f64 / out_len as f64).floor() as usize).min(in_len - 1)
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let sy = nearest(y, mask.height, h);
        for x in 0..w {
            let sx = nearest(x, mask.width, w);
            out.push(mask.values[sy * mask.width + sx]);
        }
    }
    let resized = Mask::new(w, h, out)?;
    Ok(Mask::from_image(&resized.to_image()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn byte_scaling() {
        let img = Image::from_u8(2, 2, &[0, 255, 128, 64]).unwrap();
        assert!(approx(
            img.values(),
            &[0.0, 1.0, 0.50196, 0.25098],
            1e-5
        ));
        let zero = Image::from_u8(3, 3, &[0; 9]).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_out_of_range_and_bad_length() {
        assert!(Image::new(1, 1, vec![1.5]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Mask::new(1, 2, vec![0, 2]).is_err());
    }

    #[test]
    fn identity_resize() {
        let vals: Vec<f64> = (0..256 * 256).map(|i| (i % 251) as f64 / 250.0).collect();
        let img = Image::new(256, 256, vals).unwrap();
        assert_eq!(resize_bilinear(&img, 256, 256).unwrap(), img);
    }

    #[test]
    fn constant_preserved() {
        let img = Image::filled(7, 5, 0.7).unwrap();
        for (w, h) in [(1, 1), (3, 9), (16, 16), (256, 256)] {
            let out = resize_bilinear(&img, w, h).unwrap();
            assert_eq!((out.width(), out.height()), (w, h));
            assert!(out.values().iter().all(|&v| v == 0.7));
        }
    }

    #[test]
    fn two_pixel_upsample() {
        // half-pixel centers: source x = (i + 0.5) / 2 - 0.5 = -0.25, 0.25, 0.75, 1.25,
        // clamped to [0, 1], so the weights give 0, 0.25, 0.75, 1.
        let img = Image::new(2, 1, vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(&img, 4, 1).unwrap();
        assert!(approx(out.values(), &[0.0, 0.25, 0.75, 1.0], 1e-15));
    }

    #[test]
    fn zero_target_rejected() {
        let img = Image::filled(2, 2, 0.0).unwrap();
        assert!(resize_bilinear(&img, 0, 4).is_err());
        assert!(resize_mask(&Mask::empty(2, 2), 4, 0).is_err());
    }

    #[test]
    fn mask_resize_stays_binary() {
        let m = Mask::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        let up = resize_mask(&m, 4, 4).unwrap();
        assert_eq!(
            up.values(),
            &[1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1]
        );
        let down = resize_mask(&up, 3, 5).unwrap();
        assert!(down.values().iter().all(|&v| v <= 1));
    }

    #[test]
    fn png_round_trip_and_rgb_luma() {
        let dir = tempfile::tempdir().unwrap();
        let gray = Image::from_u8(3, 2, &[0, 10, 20, 30, 40, 255]).unwrap();
        let p = dir.path().join("g.png");
        gray.save_png(&p).unwrap();
        assert_eq!(load_image(&p).unwrap(), gray);

        let rgb = image::RgbImage::from_raw(1, 1, vec![200, 100, 50]).unwrap();
        let p = dir.path().join("c.png");
        rgb.save(&p).unwrap();
        let loaded = load_image(&p).unwrap();
        let expected = (0.299 * 200.0 + 0.587 * 100.0 + 0.114 * 50.0) / 255.0;
        assert!((loaded.values()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.png");
        let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
            image::ImageBuffer::from_raw(2, 2, vec![0, 1000, 40000, 65535]).unwrap();
        buf.save(&p).unwrap();
        let err = load_image(&p).unwrap_err().to_string();
        assert!(err.contains("unsupported bit depth"), "{err}");
        assert!(err.contains("deep.png"), "{err}");
    }

    #[test]
    fn unreadable_file_names_path() {
        let err = load_image(Path::new("/nonexistent/x.png")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.png"));
    }
}
