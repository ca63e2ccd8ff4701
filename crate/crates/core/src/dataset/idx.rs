//! IDX container parsing (the MNIST / EMNIST distribution format).
//!
//! ```text
//! images: 0x00000803 | count u32 | rows u32 | cols u32 | count*rows*cols u8
//! labels: 0x00000801 | count u32 | count u8
//! ```
//!
//! All header integers are big-endian. Files may be gzip-compressed; the
//! loaders detect the gzip magic and inflate transparently.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::image::{ClassId, Image};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let chunk = bytes.get(offset..offset + 4).ok_or(Error::Length {
        expected: offset + 4,
        found: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4-byte slice")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::Format(format!(
            "bad IDX magic {magic:#010x} (expected {expected:#010x})"
        )));
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize) -> Result<&'a [u8]> {
    let expected = header
        .checked_add(len)
        .ok_or_else(|| Error::Format("IDX payload size overflows".into()))?;
    bytes.get(header..expected).ok_or(Error::Length {
        expected,
        found: bytes.len(),
    })
}

/// Parse an IDX image file. Pixel bytes are mapped to `[0, 1]` by dividing by 255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Image>> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let per_image = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("IDX image size overflows".into()))?;
    let total = count
        .checked_mul(per_image)
        .ok_or_else(|| Error::Format("IDX payload size overflows".into()))?;
    let data = payload(bytes, 16, total)?;
    if per_image == 0 {
        return Err(Error::Shape(format!("IDX images are {rows}x{cols}")));
    }
    data.chunks_exact(per_image)
        .map(|px| {
            Image::new(
                rows,
                cols,
                px.iter().map(|&b| f64::from(b) / 255.0).collect(),
            )
        })
        .collect()
}

/// Parse an IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<ClassId>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?
        .iter()
        .map(|&b| ClassId::from(b))
        .collect())
}

/// Read a file, inflating it if it starts with the gzip magic.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Load an image file and its label file into labeled images.
pub fn load_idx_pair(images: &Path, labels: &Path) -> Result<Vec<Image>> {
    let imgs = parse_idx_images(&read_maybe_gzip(images)?)?;
    let labs = parse_idx_labels(&read_maybe_gzip(labels)?)?;
    if imgs.len() != labs.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            imgs.len(),
            labs.len()
        )));
    }
    Ok(imgs
        .into_iter()
        .zip(labs)
        .map(|(img, label)| img.with_label(label))
        .collect())
}

/// Encode images as an IDX image file. Pixels are clamped to `[0, 1]` and rounded.
pub fn encode_idx_images(images: &[Image]) -> Result<Vec<u8>> {
    let (rows, cols) = match images.first() {
        Some(img) => (img.height(), img.width()),
        None => (0, 0),
    };
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        if img.height() != rows || img.width() != cols {
            return Err(Error::Shape("IDX images must share one size".into()));
        }
        out.extend(
            img.pixels()
                .iter()
                .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    Ok(out)
}

/// Encode labels as an IDX label file.
pub fn encode_idx_labels(labels: &[ClassId]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        let byte = u8::try_from(l)
            .map_err(|_| Error::Format(format!("label {l} does not fit in a byte")))?;
        out.push(byte);
    }
    Ok(out)
}
