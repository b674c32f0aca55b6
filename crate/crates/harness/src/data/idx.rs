//! IDX files: big-endian headers followed by unsigned bytes. Gzipped files are
//! recognized by their magic bytes and inflated transparently.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use flate2::read::GzDecoder;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images with intensities scaled to `[0, 1]`, each stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<f64>>,
}

pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).with_context(|| format!("inflating {}", path.display()))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes(b.try_into().unwrap())),
        None => bail!("truncated header at byte offset {offset}: expected {} bytes, found {}", offset + 4, bytes.len()),
    }
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = be_u32(bytes, 0)?;
    if magic != expected {
        bail!("bad magic at byte offset 0: expected {expected:#010x}, found {magic:#010x}");
    }
    Ok(())
}

fn check_body(bytes: &[u8], header: usize, body: usize) -> Result<()> {
    if bytes.len() != header + body {
        bail!("body at byte offset {header}: expected {} bytes in total, found {}", header + body, bytes.len());
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageSet> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let size = rows * cols;
    check_body(bytes, 16, count * size)?;
    let images = bytes[16..].chunks(size.max(1)).take(count).map(|px| px.iter().map(|&b| b as f64 / 255.0).collect()).collect();
    Ok(ImageSet { rows, cols, images })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    check_body(bytes, 8, count)?;
    Ok(bytes[8..].to_vec())
}

pub fn load_idx_images(path: &Path) -> Result<ImageSet> {
    parse_idx_images(&read_maybe_gz(path)?).with_context(|| format!("loading {}", path.display()))
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&read_maybe_gz(path)?).with_context(|| format!("loading {}", path.display()))
}

/// Intensities are rounded to the nearest of the 256 byte levels.
pub fn encode_idx_images(set: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.images.len() * set.rows * set.cols);
    for v in [IMAGES_MAGIC, set.images.len() as u32, set.rows as u32, set.cols as u32] {
        out.extend(v.to_be_bytes());
    }
    for img in &set.images {
        out.extend(img.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend(LABELS_MAGIC.to_be_bytes());
    out.extend((labels.len() as u32).to_be_bytes());
    out.extend(labels);
    out
}
