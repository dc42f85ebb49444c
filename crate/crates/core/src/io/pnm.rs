//! Binary PGM (`P5`) and PPM (`P6`) with maxval 255.

use std::path::Path;

use super::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, Mask, QuantizedImage};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(start, format!("{what} out of range")))
    }
}

/// Decodes a P5/P6 byte stream into 8-bit planar form.
pub fn decode_pnm_bytes(bytes: &[u8]) -> Result<QuantizedImage> {
    if bytes.len() < 2 {
        return Err(Error::parse(0, "missing magic"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(Error::parse(0, "magic must be P5 or P6")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_ws_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::parse(
            maxval_at,
            format!("unsupported maxval {maxval} (only 255)"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::parse(2, format!("empty image {width}x{height}")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::parse(cur.pos, "expected single whitespace after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::parse(2, "dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(Error::parse(
            bytes.len(),
            format!(
                "truncated payload: {} of {need} bytes for {width}x{height}",
                payload.len()
            ),
        ));
    }
    if payload.len() > need {
        return Err(Error::parse(
            cur.pos + need,
            format!("{} trailing bytes after payload", payload.len() - need),
        ));
    }
    QuantizedImage::from_interleaved(channels, width, height, payload.to_vec())
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageTensor> {
    decode_pnm_bytes(bytes).map(|q| q.dequantize())
}

pub fn encode_quantized(q: &QuantizedImage) -> Vec<u8> {
    let magic = if q.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", q.width, q.height).into_bytes();
    out.extend(q.to_interleaved());
    out
}

/// Encodes with the crate's byte rounding (half away from zero).
pub fn encode_pnm(image: &ImageTensor) -> Vec<u8> {
    encode_quantized(&image.quantize())
}

pub fn load_pnm(path: impl AsRef<Path>) -> Result<ImageTensor> {
    decode_pnm(&read_file(path.as_ref())?)
}

pub fn load_pnm_quantized(path: impl AsRef<Path>) -> Result<QuantizedImage> {
    decode_pnm_bytes(&read_file(path.as_ref())?)
}

pub fn save_pnm(image: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pnm(image))
}

/// Loads a PGM mask; nonzero bytes are set bits.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    Mask::from_quantized(&load_pnm_quantized(path)?)
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_quantized(&mask.to_quantized()))
}
