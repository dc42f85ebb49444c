//! IDX files (the MNIST container): big-endian magic and dimensions.

use std::path::Path;

use super::read_file;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(at, "truncated header"))
}

pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::parse(
            0,
            format!("images magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = count * rows * cols;
    let payload = &bytes[16..];
    if payload.len() != need {
        return Err(Error::parse(
            16 + payload.len().min(need),
            format!("payload has {} bytes, header declares {need}", payload.len()),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::parse(
            0,
            format!("labels magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::parse(
            8 + payload.len().min(count),
            format!("payload has {} labels, header declares {count}", payload.len()),
        ));
    }
    Ok(payload.to_vec())
}

pub fn write_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Builds a dataset from in-memory IDX bytes. The class count is
/// `max(label) + 1`, at least 10 for MNIST-style files.
pub fn decode_idx(images: &[u8], labels: &[u8]) -> Result<LabeledDataset> {
    let imgs = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if labels.len() != imgs.count {
        return Err(Error::Shape(format!(
            "{} images but {} labels",
            imgs.count,
            labels.len()
        )));
    }
    let n = imgs.rows * imgs.cols;
    let images = imgs
        .pixels
        .chunks_exact(n.max(1))
        .map(|px| ImageTensor::from_interleaved_bytes(1, imgs.cols, imgs.rows, px))
        .collect::<Result<Vec<_>>>()?;
    let classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(10);
    LabeledDataset::new(images, labels.into_iter().map(usize::from).collect(), classes)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    decode_idx(&read_file(images_path.as_ref())?, &read_file(labels_path.as_ref())?)
}
