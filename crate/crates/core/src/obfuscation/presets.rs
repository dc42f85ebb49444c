//! Named parameter settings of the evaluation grid.
//!
//! Blur radii are fractions of the diagonal of the obfuscated region: the
//! mask's bounding box when a mask is given, the whole image otherwise.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tensor::Mask;

use super::spec::{Method, ObfuscationSpec};

/// Noise level of the `dppix-*` presets.
pub const DP_PIX_SIGMA: f64 = 0.04;

pub const PRESET_NAMES: &[&str] = &[
    "blur-small",
    "blur-large",
    "plate-small",
    "plate-large",
    "pixelize-4x4",
    "pixelize-2x2",
    "pixelize-1x1",
    "dppix-4x4",
    "dppix-2x2",
    "dppix-1x1",
    "crop",
];

const TABLE3_JSON: &str = include_str!("../../presets/table3.json");

/// Image-dependent inputs a preset needs.
#[derive(Clone, Debug, Default)]
pub struct PresetContext<'a> {
    pub width: usize,
    pub height: usize,
    pub mask: Option<&'a Mask>,
    pub mask_blur_radius: Option<f64>,
    pub seed: u64,
}

impl PresetContext<'_> {
    pub fn diagonal(&self) -> f64 {
        let (w, h) = match self.mask.and_then(Mask::bounding_box) {
            Some((x0, y0, x1, y1)) => (x1 - x0, y1 - y0),
            None => (self.width, self.height),
        };
        (w as f64).hypot(h as f64)
    }
}

fn blur_fraction(name: &str) -> Option<f64> {
    Some(match name {
        "blur-small" => 10.0,
        "blur-large" => 7.0,
        "plate-small" => 50.0,
        "plate-large" => 40.0,
        _ => return None,
    })
}

fn blocks(suffix: &str) -> Option<usize> {
    match suffix {
        "4x4" => Some(4),
        "2x2" => Some(2),
        "1x1" => Some(1),
        _ => None,
    }
}

pub fn preset_method(name: &str, ctx: &PresetContext) -> Result<Method> {
    if let Some(div) = blur_fraction(name) {
        return Ok(Method::PilBlur {
            radius: ctx.diagonal() / div,
        });
    }
    if name == "crop" {
        return Ok(Method::Crop);
    }
    if let Some(k) = name.strip_prefix("pixelize-").and_then(blocks) {
        return Ok(Method::Pixelize { rows: k, cols: k });
    }
    if let Some(k) = name.strip_prefix("dppix-").and_then(blocks) {
        return Ok(Method::DpPix {
            rows: k,
            cols: k,
            sigma: DP_PIX_SIGMA,
            seed: ctx.seed,
        });
    }
    Err(Error::InvalidParam(format!(
        "unknown preset {name:?}; known: {}",
        PRESET_NAMES.join(", ")
    )))
}

pub fn preset_spec(name: &str, ctx: &PresetContext) -> Result<ObfuscationSpec> {
    let method = preset_method(name, ctx)?;
    let blur = method.is_blur();
    let spec = ObfuscationSpec::new(method)?;
    match ctx.mask {
        None => Ok(spec),
        Some(m) => {
            if blur && ctx.mask_blur_radius.is_none() {
                return Err(Error::InvalidParam(format!(
                    "preset {name} with a mask needs a mask blur radius"
                )));
            }
            spec.with_mask(m.clone(), if blur { ctx.mask_blur_radius } else { None })
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct PresetRow {
    pub label: String,
    pub preset: String,
}

#[derive(Deserialize)]
struct PresetTable {
    rows: Vec<PresetRow>,
}

pub fn parse_preset_rows(json: &str) -> Result<Vec<PresetRow>> {
    let table: PresetTable = serde_json::from_str(json)?;
    for row in &table.rows {
        preset_method(&row.preset, &PresetContext::default())?;
    }
    Ok(table.rows)
}

/// The eight discrimination rows: two blur radii, three pixelization grids,
/// three noisy grids.
pub fn table3_rows() -> Vec<PresetRow> {
    parse_preset_rows(TABLE3_JSON).expect("bundled preset table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(w: usize, h: usize) -> PresetContext<'static> {
        PresetContext {
            width: w,
            height: h,
            ..Default::default()
        }
    }

    #[test]
    fn blur_radii_follow_the_diagonal() {
        let c = ctx(28, 28);
        let Method::PilBlur { radius } = preset_method("blur-small", &c).unwrap() else {
            panic!()
        };
        assert!((radius - 3.9598).abs() < 1e-4);
        let Method::PilBlur { radius } = preset_method("blur-large", &c).unwrap() else {
            panic!()
        };
        assert!((radius - 28.0 * 2f64.sqrt() / 7.0).abs() < 1e-12);
        let p = ctx(200, 60);
        let Method::PilBlur { radius } = preset_method("plate-small", &p).unwrap() else {
            panic!()
        };
        assert!((radius - 200f64.hypot(60.0) / 50.0).abs() < 1e-12);
    }

    #[test]
    fn masked_preset_uses_mask_box() {
        let m = Mask::rect(100, 100, 10, 20, 40, 60);
        let c = PresetContext {
            width: 100,
            height: 100,
            mask: Some(&m),
            mask_blur_radius: Some(3.0),
            seed: 0,
        };
        let spec = preset_spec("blur-small", &c).unwrap();
        assert_eq!(spec.method, Method::PilBlur { radius: 5.0 });
        let no_radius = PresetContext {
            mask_blur_radius: None,
            ..c.clone()
        };
        assert!(preset_spec("blur-small", &no_radius).is_err());
        assert!(preset_spec("pixelize-2x2", &no_radius).is_ok());
    }

    #[test]
    fn dppix_preset() {
        let c = PresetContext {
            seed: 42,
            ..ctx(8, 8)
        };
        assert_eq!(
            preset_method("dppix-4x4", &c).unwrap(),
            Method::DpPix {
                rows: 4,
                cols: 4,
                sigma: 0.04,
                seed: 42
            }
        );
        assert!(preset_method("pixelize-3x3", &c).is_err());
    }

    #[test]
    fn table3_has_eight_rows() {
        let rows = table3_rows();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].preset, "blur-small");
        assert_eq!(rows[7].preset, "dppix-1x1");
    }
}
