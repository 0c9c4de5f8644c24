//! Row-major sample matrices and the `UMX1` binary format.
//!
//! Layout of a `UMX1` file (all integers little-endian):
//!
//! ```text
//! b"UMX1" | u32 version = 1 | u64 rows | u64 cols | u8 width (4 = f32, 8 = f64) | rows*cols scalars
//! ```
//!
//! Row ids live next to the matrix in `<file>.ids`, one id per line.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::dataset::DatasetRecord;
use crate::ingest::image::{Image, Mask};

const UMX_MAGIC: &[u8; 4] = b"UMX1";
const UMX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_ids: Vec<String>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, row_ids: Vec<String>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if row_ids.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "{rows} rows but {} row ids",
                row_ids.len()
            )));
        }
        Ok(DataMatrix {
            rows,
            cols,
            data,
            row_ids,
        })
    }

    /// Matrix with generated ids `r0, r1, ...`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        DataMatrix::new(rows, cols, data, (0..rows).map(|i| format!("r{i}")).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DataMatrix {
        DataMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Keeps the rows whose ids satisfy `keep`, preserving order.
    pub fn select_rows(&self, keep: impl Fn(&str) -> bool) -> DataMatrix {
        let mut data = Vec::new();
        let mut ids = Vec::new();
        for (id, row) in self.row_ids.iter().zip(self.rows_iter()) {
            if keep(id) {
                data.extend_from_slice(row);
                ids.push(id.clone());
            }
        }
        DataMatrix {
            rows: ids.len(),
            cols: self.cols,
            data,
            row_ids: ids,
        }
    }

    pub fn write_umx(&self, path: &Path, width: ScalarWidth) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(UMX_MAGIC).map_err(io)?;
        w.write_all(&UMX_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.rows as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.cols as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&[width as u8]).map_err(io)?;
        for &v in &self.data {
            match width {
                ScalarWidth::F32 => w.write_all(&(v as f32).to_le_bytes()),
                ScalarWidth::F64 => w.write_all(&v.to_le_bytes()),
            }
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
        let ids_path = ids_path(path);
        let mut ids = self.row_ids.join("\n");
        if !ids.is_empty() {
            ids.push('\n');
        }
        fs::write(&ids_path, ids).map_err(|e| Error::io(&ids_path, e))
    }

    /// Reads a `UMX1` file. A missing `.ids` sidecar yields generated ids.
    pub fn read_umx(path: &Path) -> Result<DataMatrix> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut cur = ByteCursor::new(&bytes, "UMX1");
        if cur.take(4)? != UMX_MAGIC {
            return Err(Error::format("UMX1", "bad magic"));
        }
        let version = cur.u32()?;
        if version != UMX_VERSION {
            return Err(Error::format("UMX1", format!("unsupported version {version}")));
        }
        let rows = cur.u64()? as usize;
        let cols = cur.u64()? as usize;
        let width = match cur.take(1)?[0] {
            4 => ScalarWidth::F32,
            8 => ScalarWidth::F64,
            w => return Err(Error::format("UMX1", format!("scalar width {w}"))),
        };
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format("UMX1", "size overflow"))?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(match width {
                ScalarWidth::F32 => f64::from(cur.f32()?),
                ScalarWidth::F64 => cur.f64()?,
            });
        }
        if !cur.is_empty() {
            return Err(Error::format("UMX1", "trailing bytes"));
        }
        let ids_path = ids_path(path);
        let row_ids = match fs::read_to_string(&ids_path) {
            Ok(text) => text.lines().map(str::to_owned).collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                (0..rows).map(|i| format!("r{i}")).collect()
            }
            Err(e) => return Err(Error::io(&ids_path, e)),
        };
        DataMatrix::new(rows, cols, data, row_ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ScalarWidth {
    F32 = 4,
    F64 = 8,
}

pub fn ids_path(umx: &Path) -> PathBuf {
    let mut s = umx.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

pub(crate) struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], format: &'static str) -> Self {
        ByteCursor {
            bytes,
            pos: 0,
            format,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.format, "truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Images,
    Masks,
}

/// Stacks record pixels into a matrix, one row per record.
pub fn flatten(records: &[DatasetRecord], which: Channel) -> Result<DataMatrix> {
    let Some(first) = records.first() else {
        return DataMatrix::new(0, 0, Vec::new(), Vec::new());
    };
    let (w, h) = (first.image.width(), first.image.height());
    let mut data = Vec::with_capacity(records.len() * w * h);
    for rec in records {
        if (rec.image.width(), rec.image.height()) != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "record {} is {}x{}, expected {w}x{h}",
                rec.id,
                rec.image.width(),
                rec.image.height()
            )));
        }
        match which {
            Channel::Images => data.extend_from_slice(rec.image.values()),
            Channel::Masks => {
                let mask = rec.mask.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!("record {} has no mask", rec.id))
                })?;
                data.extend(mask.values().iter().map(|&v| f64::from(v)));
            }
        }
    }
    DataMatrix::new(
        records.len(),
        w * h,
        data,
        records.iter().map(|r| r.id.clone()).collect(),
    )
}

/// Inverse of [`flatten`] for the image channel. Values are clamped to `[0, 1]`.
pub fn unflatten_images(m: &DataMatrix, width: usize, height: usize) -> Result<Vec<(String, Image)>> {
    if width * height != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{width}x{height} does not match {} columns",
            m.cols()
        )));
    }
    m.row_ids()
        .iter()
        .zip(m.rows_iter())
        .map(|(id, row)| Ok((id.clone(), Image::from_unclamped(width, height, row)?)))
        .collect()
}

pub fn unflatten_masks(m: &DataMatrix, width: usize, height: usize) -> Result<Vec<(String, Mask)>> {
    if width * height != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{width}x{height} does not match {} columns",
            m.cols()
        )));
    }
    m.row_ids()
        .iter()
        .zip(m.rows_iter())
        .map(|(id, row)| {
            let values = row.iter().map(|&v| u8::from(v >= 0.5)).collect();
            Ok((id.clone(), Mask::new(width, height, values)?))
        })
        .collect()
}
