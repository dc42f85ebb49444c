//! Pillow-compatible `GaussianBlur`.
//!
//! The radius is turned into a fractional box of radius `r_f` computed in
//! single precision. Each pass is a box of integer half-width `r = trunc(r_f)`
//! with 24-bit fixed-point weights plus a fractional weight on the two
//! samples just outside the box. Indices are clamped to the edge. Three
//! horizontal passes run first, then three vertical ones, each rounding back
//! to 8 bits with `(acc + 2^23) >> 24`.

use crate::error::{ensure, Error, Result};
use crate::tensor::{ImageTensor, QuantizedImage};

pub const PASSES: usize = 3;
/// Fixed-point scale of the box weights.
pub const WEIGHT_ONE: u32 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PassRounding {
    /// `(acc + 2^23) >> 24` on 24-bit fixed-point accumulators.
    FixedPoint24HalfUp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Out-of-range indices clamp to the nearest edge pixel.
    EdgeReplicate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlurProfile {
    pub passes: usize,
    /// Fractional box radius per axis.
    pub box_radius: f32,
    /// Integer core width `2r + 1` of each pass.
    pub box_widths: Vec<usize>,
    /// Fixed-point weight of each core sample.
    pub center_weight: u32,
    /// Fixed-point weight of the two samples at distance `r + 1`.
    pub edge_weight: u32,
    pub per_pass_rounding: PassRounding,
    pub padding: Padding,
}

impl BlurProfile {
    pub fn half_width(&self) -> usize {
        self.box_widths[0] / 2
    }

    /// Real-valued weights `(center, edge)` summing to one over the window.
    pub fn unit_weights(&self) -> (f64, f64) {
        let one = WEIGHT_ONE as f64;
        (self.center_weight as f64 / one, self.edge_weight as f64 / one)
    }
}

fn box_radius(radius: f32) -> f32 {
    let sigma2 = radius * radius / PASSES as f32;
    let big_l = (12.0 * sigma2 as f64 + 1.0).sqrt() as f32;
    let l = ((big_l as f64 - 1.0) / 2.0).floor() as f32;
    let a = (2.0 * l + 1.0) * (l * (l + 1.0) - 3.0 * sigma2);
    let a = a / (6.0 * (sigma2 - (l + 1.0) * (l + 1.0)));
    l + a
}

pub fn derive_pil_profile(radius: f64) -> Result<BlurProfile> {
    ensure!(
        radius > 0.0 && radius.is_finite(),
        Error::InvalidParam(format!("radius must be > 0, got {radius}"))
    );
    let r_f = box_radius(radius as f32);
    let r = r_f as usize;
    let center_weight = (WEIGHT_ONE as f32 / (r_f * 2.0 + 1.0)) as u32;
    let edge_weight = (WEIGHT_ONE - (2 * r as u32 + 1) * center_weight) / 2;
    Ok(BlurProfile {
        passes: PASSES,
        box_radius: r_f,
        box_widths: vec![2 * r + 1; PASSES],
        center_weight,
        edge_weight,
        per_pass_rounding: PassRounding::FixedPoint24HalfUp,
        padding: Padding::EdgeReplicate,
    })
}

/// One pass over a strided line of `n` samples.
fn box_line(src: &[u8], dst: &mut [u8], n: usize, stride: usize, p: &BlurProfile) {
    let r = p.half_width() as isize;
    let last = n as isize - 1;
    let at = |i: isize| src[i.clamp(0, last) as usize * stride] as u64;
    let ww = p.center_weight as u64;
    let fw = p.edge_weight as u64;
    // Running window sum over clamped indices.
    let mut acc: u64 = (-r..=r).map(at).sum();
    for x in 0..n as isize {
        if x > 0 {
            acc += at(x + r);
            acc -= at(x - r - 1);
        }
        let bulk = acc * ww + (at(x - r - 1) + at(x + r + 1)) * fw;
        dst[x as usize * stride] = ((bulk + (1 << 23)) >> 24) as u8;
    }
}

fn blur_plane(plane: &mut [u8], w: usize, h: usize, p: &BlurProfile) {
    let mut tmp = vec![0u8; plane.len()];
    for _ in 0..p.passes {
        for y in 0..h {
            let row = y * w..(y + 1) * w;
            box_line(&plane[row.clone()], &mut tmp[row], w, 1, p);
        }
        plane.copy_from_slice(&tmp);
    }
    for _ in 0..p.passes {
        for x in 0..w {
            box_line(&plane[x..], &mut tmp[x..], h, w, p);
        }
        plane.copy_from_slice(&tmp);
    }
}

/// Blurs an 8-bit image in place of Pillow's `filter(GaussianBlur(radius))`.
pub fn pil_blur_quantized(q: &QuantizedImage, radius: f64) -> Result<QuantizedImage> {
    let profile = derive_pil_profile(radius)?;
    let mut out = q.clone();
    let (w, h) = (q.width, q.height);
    for c in 0..q.channels {
        blur_plane(out.plane_mut(c), w, h, &profile);
    }
    Ok(out)
}

/// Quantizes `x`, blurs, and dequantizes.
pub fn pil_blur(x: &ImageTensor, radius: f64) -> Result<ImageTensor> {
    Ok(pil_blur_quantized(&x.quantize(), radius)?.dequantize())
}
