//! Forward obfuscation operators: crop, Pillow and OpenCV blurs,
//! pixelization and noisy pixelization, with optional masks.
//!
//! Crop and the pixelization family act on real values and touch only the
//! masked pixels. Blurs act on the 8-bit quantization of the input; with a
//! mask, the blurred image is composited over the original through the mask
//! blurred by the Pillow blur at `mask_blur_radius`:
//! `out = div255(x * (255 - m) + g * m)`.

pub mod boxblur;
pub mod fixtures;
pub mod pil;
pub mod pixelize;
pub mod presets;
pub mod spec;

pub use boxblur::{box_blur, box_blur_quantized};
pub use pil::{derive_pil_profile, pil_blur, pil_blur_quantized, BlurProfile};
pub use pixelize::{dp_pix, dp_pix_masked, pixelize, pixelize_masked, BlockGrid};
pub use spec::{MaskSource, Method, ObfuscationSpec};

use crate::error::{ensure, Error, Result};
use crate::tensor::{ImageTensor, Mask, QuantizedImage};

pub fn crop_obfuscate(x: &ImageTensor, mask: &Mask) -> Result<ImageTensor> {
    mask.check_fits(x)?;
    let n = x.plane_len();
    let mut data = x.data().to_vec();
    for (i, v) in data.iter_mut().enumerate() {
        if mask.bits()[i % n] {
            *v = 0.0;
        }
    }
    x.with_data(data)
}

/// Rounded `a / 255` for `a <= 255 * 255`.
#[inline]
pub fn div255(a: u32) -> u32 {
    (((a + 128) >> 8) + a + 128) >> 8
}

/// Per-pixel `div255(orig * (255 - m) + blurred * m)` with a one-channel
/// alpha `m` shared by every channel.
pub fn composite(
    blurred: &QuantizedImage,
    orig: &QuantizedImage,
    alpha: &QuantizedImage,
) -> Result<QuantizedImage> {
    ensure!(
        blurred.channels == orig.channels
            && (blurred.width, blurred.height) == (orig.width, orig.height)
            && alpha.channels == 1
            && (alpha.width, alpha.height) == (orig.width, orig.height),
        Error::Shape("composite operands disagree in shape".into())
    );
    let mut out = orig.clone();
    for c in 0..orig.channels {
        let (g, x) = (blurred.plane(c), orig.plane(c));
        for (i, o) in out.plane_mut(c).iter_mut().enumerate() {
            let m = alpha.data[i] as u32;
            *o = div255(x[i] as u32 * (255 - m) + g[i] as u32 * m) as u8;
        }
    }
    Ok(out)
}

/// The blurred mask used as blend weight, as bytes.
pub fn soft_mask(mask: &Mask, mask_blur_radius: f64) -> Result<QuantizedImage> {
    pil_blur_quantized(&mask.to_quantized(), mask_blur_radius)
}

fn blur_quantized(q: &QuantizedImage, method: &Method) -> Result<QuantizedImage> {
    match *method {
        Method::PilBlur { radius } => pil_blur_quantized(q, radius),
        Method::BoxBlur { kw, kh } => box_blur_quantized(q, kw, kh),
        _ => unreachable!("not a blur"),
    }
}

/// Applies `spec` to the whole image, or to its mask when one is set.
/// Path-backed masks must be resolved first.
pub fn obfuscate(x: &ImageTensor, spec: &ObfuscationSpec) -> Result<ImageTensor> {
    spec.validate()?;
    let mask = spec.inline_mask()?;
    if let Some(m) = mask {
        m.check_fits(x)?;
    }
    match spec.method {
        Method::Crop => match mask {
            Some(m) => crop_obfuscate(x, m),
            None => crop_obfuscate(x, &Mask::full(x.width(), x.height())),
        },
        Method::Pixelize { rows, cols } => pixelize_masked(x, rows, cols, mask),
        Method::DpPix {
            rows,
            cols,
            sigma,
            seed,
        } => dp_pix_masked(x, rows, cols, sigma, seed, mask),
        Method::PilBlur { .. } | Method::BoxBlur { .. } => {
            let q = x.quantize();
            let blurred = blur_quantized(&q, &spec.method)?;
            match mask {
                None => Ok(blurred.dequantize()),
                Some(m) => {
                    let r = spec.mask_blur_radius.ok_or_else(|| {
                        Error::InvalidParam("masked blur needs mask_blur_radius".into())
                    })?;
                    Ok(composite(&blurred, &q, &soft_mask(m, r)?)?.dequantize())
                }
            }
        }
    }
}

/// Like [`obfuscate`] but requires a mask.
pub fn masked_apply(x: &ImageTensor, spec: &ObfuscationSpec) -> Result<ImageTensor> {
    ensure!(
        spec.mask.is_some(),
        Error::InvalidParam("masked application needs a mask".into())
    );
    obfuscate(x, spec)
}
