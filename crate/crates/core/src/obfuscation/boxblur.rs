//! OpenCV-compatible normalized box filter (`cv2.blur`).
//!
//! Window sums use reflect-101 borders (`dcb|abcd|cba`) with the anchor at
//! `k / 2`. The sum is then divided by the kernel area with the reference
//! build's rounding:
//!
//! * area 1: identity;
//! * area <= 256: `((s + delta) * scale) >> 23` with `scale, delta` derived
//!   from `2^23 / area`;
//! * area > 256: `s * (1 / area)` rounded half to even, in single precision
//!   for the first `floor(w * c / 8) * 8` interleaved columns of each row and
//!   in double precision for the remaining ones.

use crate::error::{ensure, Error, Result};
use crate::tensor::{ImageTensor, QuantizedImage};

/// Largest area handled by the fixed-point path.
pub const FIXED_POINT_MAX_AREA: usize = 256;
const FIXED_SHIFT: u32 = 23;
/// Columns per vector block on the floating-point path.
const SIMD_LANES: usize = 8;

/// Reflect-101 index into `0..n`.
pub fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i as usize
}

/// Window sums along rows or columns for one plane.
fn window_sums(src: &[u64], w: usize, h: usize, k: usize, horizontal: bool) -> Vec<u64> {
    let anchor = (k / 2) as isize;
    let mut out = vec![0u64; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0;
            for t in 0..k as isize {
                let off = t - anchor;
                s += if horizontal {
                    src[y * w + reflect101(x as isize + off, w)]
                } else {
                    src[reflect101(y as isize + off, h) * w + x]
                };
            }
            out[y * w + x] = s;
        }
    }
    out
}

fn fixed_point_divisor(area: usize) -> (u64, u64) {
    let scalef = (1u64 << FIXED_SHIFT) as f64 / area as f64;
    let mut scale = scalef.floor() as u64;
    let mut delta = area as u64 / 2;
    if scalef - (scale as f64) < 0.5 {
        delta += 1;
    } else {
        scale += 1;
    }
    (scale, delta)
}

pub fn box_blur_quantized(q: &QuantizedImage, kw: usize, kh: usize) -> Result<QuantizedImage> {
    ensure!(
        kw >= 1 && kh >= 1,
        Error::InvalidParam(format!("kernel dims must be >= 1, got {kw}x{kh}"))
    );
    let (c, w, h) = (q.channels, q.width, q.height);
    ensure!(
        kw <= 2 * w && kh <= 2 * h,
        Error::InvalidParam(format!(
            "kernel {kw}x{kh} larger than twice the {w}x{h} image"
        ))
    );
    let area = kw * kh;
    if area == 1 {
        return Ok(q.clone());
    }
    let mut out = q.clone();
    let vector_cols = (w * c / SIMD_LANES) * SIMD_LANES;
    let (scale, delta) = fixed_point_divisor(area);
    let inv32 = (1.0 / area as f64) as f32;
    let inv64 = 1.0 / area as f64;
    for ch in 0..c {
        let plane: Vec<u64> = q.plane(ch).iter().map(|&b| b as u64).collect();
        let sums = window_sums(&window_sums(&plane, w, h, kw, true), w, h, kh, false);
        let dst = out.plane_mut(ch);
        for (i, &s) in sums.iter().enumerate() {
            let v = if area <= FIXED_POINT_MAX_AREA {
                ((s + delta) * scale) >> FIXED_SHIFT
            } else if (i % w) * c + ch < vector_cols {
                (s as f32 * inv32).round_ties_even() as u64
            } else {
                (s as f64 * inv64).round_ties_even() as u64
            };
            dst[i] = v.min(255) as u8;
        }
    }
    Ok(out)
}

/// Quantizes `x`, box-blurs, and dequantizes.
pub fn box_blur(x: &ImageTensor, kw: usize, kh: usize) -> Result<ImageTensor> {
    Ok(box_blur_quantized(&x.quantize(), kw, kh)?.dequantize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect101_matches_numpy_reflect() {
        // numpy.pad(range(4), 6, mode="reflect")
        let expect = [0, 1, 2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1, 2, 3];
        let got: Vec<usize> = (-6..10).map(|i| reflect101(i, 4)).collect();
        assert_eq!(got, expect);
        assert_eq!(reflect101(-3, 1), 0);
    }

    #[test]
    fn unit_kernel_is_identity_and_constants_survive() {
        let q = QuantizedImage::new(1, 5, 3, (0..15).map(|v| v as u8 * 17).collect()).unwrap();
        assert_eq!(box_blur_quantized(&q, 1, 1).unwrap(), q);
        for v in [0u8, 3, 128, 255] {
            let q = QuantizedImage::new(3, 12, 9, vec![v; 324]).unwrap();
            for (kw, kh) in [(3, 3), (7, 5), (17, 17), (24, 18)] {
                assert_eq!(box_blur_quantized(&q, kw, kh).unwrap(), q);
            }
        }
    }

    #[test]
    fn kernel_too_large() {
        let q = QuantizedImage::new(1, 4, 4, vec![0; 16]).unwrap();
        assert!(box_blur_quantized(&q, 9, 3).is_err());
        assert!(box_blur_quantized(&q, 0, 3).is_err());
        assert!(box_blur_quantized(&q, 8, 8).is_ok());
    }

    #[test]
    fn divisor_constants() {
        // area 9: 2^23/9 = 932067.55..., fractional part >= 0.5
        assert_eq!(fixed_point_divisor(9), (932068, 4));
        // area 3: 2796202.67 -> rounds scale up
        assert_eq!(fixed_point_divisor(3), (2796203, 1));
        // area 5: 1677721.6
        assert_eq!(fixed_point_divisor(5), (1677722, 2));
        // area 16: exact power of two, fractional part 0
        assert_eq!(fixed_point_divisor(16), (524288, 9));
    }
}
