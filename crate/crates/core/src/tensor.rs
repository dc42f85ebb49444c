//! Image and mask representations.
//!
//! Images are stored planar (`channel`, then row-major `y * width + x`) as
//! unit-range `f64`. The 8-bit view used by the reference blur pipelines is
//! [`QuantizedImage`], produced by [`ImageTensor::quantize`].

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Maps a unit-range value to a byte: clamp to `[0, 1]`, scale by 255 and
/// round half away from zero.
#[inline]
pub fn quantize_value(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round() as u8
}

#[inline]
pub fn dequantize_value(b: u8) -> f64 {
    b as f64 / 255.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    channels: usize,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(
            channels == 1 || channels == 3,
            Error::Shape(format!("channels must be 1 or 3, got {channels}"))
        );
        ensure!(
            width > 0 && height > 0,
            Error::Shape(format!("empty image {width}x{height}"))
        );
        ensure!(
            data.len() == channels * width * height,
            Error::Shape(format!(
                "data length {} != {channels}x{width}x{height}",
                data.len()
            ))
        );
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            channels,
            width,
            height,
            data,
        })
    }

    pub fn filled(channels: usize, width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(channels, width, height, vec![value; channels * width * height])
    }

    pub fn zeros(channels: usize, width: usize, height: usize) -> Result<Self> {
        Self::filled(channels, width, height, 0.0)
    }

    pub fn from_fn(
        channels: usize,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * width * height);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self::new(channels, width, height, data)
    }

    /// Builds an image from interleaved bytes (`y`, `x`, `channel` order), as
    /// stored in PPM/PGM payloads.
    pub fn from_interleaved_bytes(
        channels: usize,
        width: usize,
        height: usize,
        bytes: &[u8],
    ) -> Result<Self> {
        QuantizedImage::from_interleaved(channels, width, height, bytes.to_vec())
            .map(|q| q.dequantize())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(channels, width, height)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    /// Replaces the data buffer, keeping the shape. Fails on a length
    /// mismatch or non-finite values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.channels, self.width, self.height, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn clamp_unit(&self) -> Self {
        Self {
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }

    pub fn check_same_shape(&self, other: &ImageTensor) -> Result<()> {
        ensure!(
            self.shape() == other.shape(),
            Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape()))
        );
        Ok(())
    }

    pub fn l2_distance(&self, other: &ImageTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn quantize(&self) -> QuantizedImage {
        QuantizedImage {
            channels: self.channels,
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| quantize_value(v)).collect(),
        }
    }

    /// `dequantize(quantize(self))`: the exact values an 8-bit file would
    /// store.
    pub fn quantized(&self) -> Self {
        self.quantize().dequantize()
    }

    /// Diagonal length `sqrt(w^2 + h^2)`.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }
}

/// Planar 8-bit image, the domain of the reference blur pipelines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedImage {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl QuantizedImage {
    pub fn new(channels: usize, width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        ensure!(
            data.len() == channels * width * height && width > 0 && height > 0,
            Error::Shape(format!(
                "byte length {} != {channels}x{width}x{height}",
                data.len()
            ))
        );
        Ok(Self {
            channels,
            width,
            height,
            data,
        })
    }

    pub fn from_interleaved(
        channels: usize,
        width: usize,
        height: usize,
        bytes: Vec<u8>,
    ) -> Result<Self> {
        if channels == 1 {
            return Self::new(1, width, height, bytes);
        }
        ensure!(
            bytes.len() == channels * width * height,
            Error::Shape(format!(
                "byte length {} != {channels}x{width}x{height}",
                bytes.len()
            ))
        );
        let n = width * height;
        let mut data = vec![0u8; bytes.len()];
        for (i, px) in bytes.chunks_exact(channels).enumerate() {
            for (c, &b) in px.iter().enumerate() {
                data[c * n + i] = b;
            }
        }
        Self::new(channels, width, height, data)
    }

    pub fn to_interleaved(&self) -> Vec<u8> {
        if self.channels == 1 {
            return self.data.clone();
        }
        let n = self.width * self.height;
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..n {
            for c in 0..self.channels {
                out.push(self.data[c * n + i]);
            }
        }
        out
    }

    pub fn plane(&self, c: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [u8] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn dequantize(&self) -> ImageTensor {
        ImageTensor {
            channels: self.channels,
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| dequantize_value(b)).collect(),
        }
    }
}

/// Binary `width x height` matrix marking the private region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        ensure!(
            bits.len() == width * height && width > 0 && height > 0,
            Error::Shape(format!(
                "mask length {} != {width}x{height}",
                bits.len()
            ))
        );
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            bits,
        }
    }

    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)`, clipped to the mask.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// Bounding box `(x0, y0, x1, y1)` (exclusive ends) of the set bits.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bb = Some(match bb {
                        None => (x, y, x + 1, y + 1),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
                    });
                }
            }
        }
        bb
    }

    pub fn check_fits(&self, image: &ImageTensor) -> Result<()> {
        ensure!(
            self.width == image.width() && self.height == image.height(),
            Error::Shape(format!(
                "mask {}x{} vs image {}x{}",
                self.width,
                self.height,
                image.width(),
                image.height()
            ))
        );
        Ok(())
    }

    /// Mask as an 8-bit single-channel image with 0/255 entries.
    pub fn to_quantized(&self) -> QuantizedImage {
        QuantizedImage {
            channels: 1,
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    /// Any nonzero byte is a set bit.
    pub fn from_quantized(q: &QuantizedImage) -> Result<Self> {
        ensure!(
            q.channels == 1,
            Error::Shape(format!("mask must be single-channel, got {}", q.channels))
        );
        Self::new(q.width, q.height, q.data.iter().map(|&b| b != 0).collect())
    }
}
