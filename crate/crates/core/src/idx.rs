//! Reader and writer for the big-endian IDX image/label files used by MNIST and Fashion-MNIST.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const N_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxDataset {
    pub rows: usize,
    pub cols: usize,
    /// `len() * rows * cols` intensities, image-major.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl IdxDataset {
    pub fn new(rows: usize, cols: usize, images: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() * rows * cols {
            return Err(Error::structural(format!(
                "{} pixel bytes do not match {} labels of {rows}x{cols}",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= N_CLASSES) {
            return Err(Error::structural(format!("label {bad} is not a digit class")));
        }
        Ok(IdxDataset {
            rows,
            cols,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, k: usize) -> &[u8] {
        let n = self.pixels();
        &self.images[k * n..(k + 1) * n]
    }

    pub fn label(&self, k: usize) -> u8 {
        self.labels[k]
    }

    /// `limit` of 0 means the whole dataset.
    pub fn effective_len(&self, limit: usize) -> usize {
        if limit == 0 {
            self.len()
        } else {
            limit.min(self.len())
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl Cursor<'_> {
    fn u32(&mut self, field: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| {
            Error::parse(
                format!("{}: truncated header, missing {field}", self.name),
                self.bytes.len() as u64,
            )
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().unwrap()))
    }

    fn payload(&mut self, len: usize) -> Result<&[u8]> {
        let available = self.bytes.len() - self.pos;
        if available < len {
            return Err(Error::parse(
                format!(
                    "{}: truncated payload, expected {len} bytes but found {available}",
                    self.name
                ),
                self.bytes.len() as u64,
            ));
        }
        if available > len {
            return Err(Error::parse(
                format!("{}: {} trailing bytes after payload", self.name, available - len),
                (self.pos + len) as u64,
            ));
        }
        Ok(&self.bytes[self.pos..])
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let m = self.u32("magic")?;
        if m != expected {
            return Err(Error::parse(
                format!("{}: wrong magic 0x{m:08x}, expected 0x{expected:08x}", self.name),
                0,
            ));
        }
        Ok(())
    }
}

/// Parse an images file body; returns `(rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut c = Cursor {
        bytes,
        pos: 0,
        name: "images",
    };
    c.magic(IMAGES_MAGIC)?;
    let n = c.u32("image count")? as usize;
    let rows = c.u32("row count")? as usize;
    let cols = c.u32("column count")? as usize;
    let data = c.payload(n * rows * cols)?;
    Ok((rows, cols, data.to_vec()))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut c = Cursor {
        bytes,
        pos: 0,
        name: "labels",
    };
    c.magic(LABELS_MAGIC)?;
    let n = c.u32("label count")? as usize;
    Ok(c.payload(n)?.to_vec())
}

pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<IdxDataset> {
    let (rows, cols, images) = parse_images(image_bytes)?;
    let labels = parse_labels(label_bytes)?;
    let n_images = images.len().checked_div(rows * cols).unwrap_or(0);
    if n_images != labels.len() {
        return Err(Error::parse(
            format!("count mismatch: {n_images} images but {} labels", labels.len()),
            4,
        ));
    }
    if let Some(pos) = labels.iter().position(|&l| l as usize >= N_CLASSES) {
        return Err(Error::parse(
            format!("label {} is not a digit class", labels[pos]),
            8 + pos as u64,
        ));
    }
    Ok(IdxDataset {
        rows,
        cols,
        images,
        labels,
    })
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<IdxDataset> {
    let ip = images_path.as_ref();
    let lp = labels_path.as_ref();
    let images = fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let labels = fs::read(lp).map_err(|e| Error::io(lp, e))?;
    parse_idx(&images, &labels)
}

pub fn encode_images(ds: &IdxDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + ds.images.len());
    for v in [IMAGES_MAGIC, ds.len() as u32, ds.rows as u32, ds.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&ds.images);
    out
}

pub fn encode_labels(ds: &IdxDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + ds.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    out.extend_from_slice(&ds.labels);
    out
}

/// Write the dataset as an images/labels IDX pair.
pub fn save_idx(ds: &IdxDataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    let ip = images_path.as_ref();
    let lp = labels_path.as_ref();
    fs::write(ip, encode_images(ds)).map_err(|e| Error::io(ip, e))?;
    fs::write(lp, encode_labels(ds)).map_err(|e| Error::io(lp, e))
}
