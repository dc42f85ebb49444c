//! Obfuscation parameters and their canonical JSON form.
//!
//! ```json
//! {"method":"dp_pix","blocks":[4,4],"sigma":0.04,"seed":7,"mask":"face.pgm","mask_blur_radius":null}
//! ```
//!
//! Exactly the fields of the chosen method may be present. `blocks` is
//! `[rows, cols]` of the block grid; `kernel_dims` is `[width, height]`.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{ensure, Error, Result};
use crate::io::load_mask;
use crate::tensor::Mask;

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Crop,
    /// Pillow `GaussianBlur(radius)`.
    PilBlur { radius: f64 },
    /// OpenCV `blur(img, (kw, kh))`.
    BoxBlur { kw: usize, kh: usize },
    /// `rows x cols` block means.
    Pixelize { rows: usize, cols: usize },
    /// Pixelization plus per-block `N(0, sigma^2)` noise.
    DpPix {
        rows: usize,
        cols: usize,
        sigma: f64,
        seed: u64,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Crop => "crop",
            Method::PilBlur { .. } => "pil_blur",
            Method::BoxBlur { .. } => "box_blur",
            Method::Pixelize { .. } => "pixelize",
            Method::DpPix { .. } => "dp_pix",
        }
    }

    pub fn is_blur(&self) -> bool {
        matches!(self, Method::PilBlur { .. } | Method::BoxBlur { .. })
    }

    /// Whether the output is a deterministic function of the input.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Method::DpPix { sigma, .. } if *sigma > 0.0)
    }
}

/// Where the mask comes from: a PGM path (as written in JSON) or an
/// in-memory mask.
#[derive(Clone, Debug, PartialEq)]
pub enum MaskSource {
    Path(PathBuf),
    Inline(Mask),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObfuscationSpec {
    pub method: Method,
    pub mask: Option<MaskSource>,
    pub mask_blur_radius: Option<f64>,
}

impl ObfuscationSpec {
    /// Full-image application, no mask.
    pub fn new(method: Method) -> Result<Self> {
        let spec = Self {
            method,
            mask: None,
            mask_blur_radius: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mask(mut self, mask: Mask, mask_blur_radius: Option<f64>) -> Result<Self> {
        self.mask = Some(MaskSource::Inline(mask));
        self.mask_blur_radius = mask_blur_radius;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Crop => {}
            Method::PilBlur { radius } => ensure!(
                radius > 0.0 && radius.is_finite(),
                Error::InvalidParam(format!("radius must be > 0, got {radius}"))
            ),
            Method::BoxBlur { kw, kh } => ensure!(
                kw >= 1 && kh >= 1,
                Error::InvalidParam(format!("kernel dims must be >= 1, got {kw}x{kh}"))
            ),
            Method::Pixelize { rows, cols } => check_blocks(rows, cols)?,
            Method::DpPix {
                rows, cols, sigma, ..
            } => {
                check_blocks(rows, cols)?;
                ensure!(
                    sigma >= 0.0 && sigma.is_finite(),
                    Error::InvalidParam(format!("sigma must be >= 0, got {sigma}"))
                );
            }
        }
        if let Some(r) = self.mask_blur_radius {
            ensure!(
                self.method.is_blur(),
                Error::InvalidParam("mask_blur_radius only applies to blur methods".into())
            );
            ensure!(
                r > 0.0 && r.is_finite(),
                Error::InvalidParam(format!("mask_blur_radius must be > 0, got {r}"))
            );
        }
        Ok(())
    }

    /// Loads a path-backed mask, resolving relative paths against `base`.
    pub fn resolve_mask(&self, base: Option<&Path>) -> Result<Option<Mask>> {
        match &self.mask {
            None => Ok(None),
            Some(MaskSource::Inline(m)) => Ok(Some(m.clone())),
            Some(MaskSource::Path(p)) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                load_mask(path).map(Some)
            }
        }
    }

    /// Replaces a path-backed mask with the loaded mask.
    pub fn resolved(&self, base: Option<&Path>) -> Result<Self> {
        let mut out = self.clone();
        out.mask = self.resolve_mask(base)?.map(MaskSource::Inline);
        Ok(out)
    }

    pub fn inline_mask(&self) -> Result<Option<&Mask>> {
        match &self.mask {
            None => Ok(None),
            Some(MaskSource::Inline(m)) => Ok(Some(m)),
            Some(MaskSource::Path(p)) => Err(Error::InvalidParam(format!(
                "mask {} not loaded; resolve the spec first",
                p.display()
            ))),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("method".into(), json!(self.method.name()));
        match &self.method {
            Method::Crop => {}
            Method::PilBlur { radius } => {
                obj.insert("radius".into(), json!(radius));
            }
            Method::BoxBlur { kw, kh } => {
                obj.insert("kernel_dims".into(), json!([kw, kh]));
            }
            Method::Pixelize { rows, cols } => {
                obj.insert("blocks".into(), json!([rows, cols]));
            }
            Method::DpPix {
                rows,
                cols,
                sigma,
                seed,
            } => {
                obj.insert("blocks".into(), json!([rows, cols]));
                obj.insert("sigma".into(), json!(sigma));
                obj.insert("seed".into(), json!(seed));
            }
        }
        let mask = match &self.mask {
            None => Value::Null,
            Some(MaskSource::Path(p)) => json!(p.to_string_lossy()),
            Some(MaskSource::Inline(m)) => inline_mask_json(m),
        };
        obj.insert("mask".into(), mask);
        obj.insert("mask_blur_radius".into(), json!(self.mask_blur_radius));
        Value::Object(obj)
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    /// Parses the canonical object. `ignore` names extra keys to skip (the
    /// fixture files carry a `library` key).
    pub fn from_json_value(v: &Value, ignore: &[&str]) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::InvalidParam("spec must be a JSON object".into()))?;
        let method = obj
            .get("method")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidParam("spec.method missing".into()))?;
        let allowed: &[&str] = match method {
            "crop" => &[],
            "pil_blur" => &["radius"],
            "box_blur" => &["kernel_dims"],
            "pixelize" => &["blocks"],
            "dp_pix" => &["blocks", "sigma", "seed"],
            other => return Err(Error::InvalidParam(format!("unknown method {other:?}"))),
        };
        for (k, v) in obj {
            let common = matches!(k.as_str(), "method" | "mask" | "mask_blur_radius");
            if !common && !allowed.contains(&k.as_str()) && !ignore.contains(&k.as_str()) {
                if v.is_null() {
                    continue;
                }
                return Err(Error::InvalidParam(format!(
                    "field {k:?} is not valid for method {method}"
                )));
            }
        }
        let method = match method {
            "crop" => Method::Crop,
            "pil_blur" => Method::PilBlur {
                radius: get_f64(obj, "radius")?,
            },
            "box_blur" => {
                let (kw, kh) = get_pair(obj, "kernel_dims")?;
                Method::BoxBlur { kw, kh }
            }
            "pixelize" => {
                let (rows, cols) = get_pair(obj, "blocks")?;
                Method::Pixelize { rows, cols }
            }
            _ => {
                let (rows, cols) = get_pair(obj, "blocks")?;
                Method::DpPix {
                    rows,
                    cols,
                    sigma: get_f64(obj, "sigma")?,
                    seed: obj
                        .get("seed")
                        .and_then(Value::as_u64)
                        .ok_or_else(|| Error::InvalidParam("dp_pix needs integer seed".into()))?,
                }
            }
        };
        let mask = match obj.get("mask") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(MaskSource::Path(PathBuf::from(s))),
            Some(v @ Value::Object(_)) => Some(MaskSource::Inline(parse_inline_mask(v)?)),
            Some(_) => return Err(Error::InvalidParam("mask must be a path string".into())),
        };
        let mask_blur_radius = match obj.get("mask_blur_radius") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_f64()
                    .ok_or_else(|| Error::InvalidParam("mask_blur_radius must be a number".into()))?,
            ),
        };
        let spec = Self {
            method,
            mask,
            mask_blur_radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json_value(&serde_json::from_str(s)?, &[])
    }
}

fn check_blocks(rows: usize, cols: usize) -> Result<()> {
    ensure!(
        rows >= 1 && cols >= 1,
        Error::InvalidParam(format!("block grid must be >= 1x1, got {rows}x{cols}"))
    );
    Ok(())
}

fn get_f64(obj: &Map<String, Value>, key: &str) -> Result<f64> {
    obj.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::InvalidParam(format!("{key} must be a number")))
}

fn get_pair(obj: &Map<String, Value>, key: &str) -> Result<(usize, usize)> {
    let arr = obj
        .get(key)
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::InvalidParam(format!("{key} must be a 2-element array")))?;
    let get = |i: usize| {
        arr[i]
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::InvalidParam(format!("{key}[{i}] must be a non-negative integer")))
    };
    Ok((get(0)?, get(1)?))
}

fn inline_mask_json(m: &Mask) -> Value {
    let rows: Vec<String> = (0..m.height())
        .map(|y| {
            (0..m.width())
                .map(|x| if m.get(x, y) { '1' } else { '0' })
                .collect()
        })
        .collect();
    json!({"width": m.width(), "height": m.height(), "rows": rows})
}

fn parse_inline_mask(v: &Value) -> Result<Mask> {
    let bad = || Error::InvalidParam("inline mask needs width, height and rows".into());
    let width = v.get("width").and_then(Value::as_u64).ok_or_else(bad)? as usize;
    let height = v.get("height").and_then(Value::as_u64).ok_or_else(bad)? as usize;
    let rows = v.get("rows").and_then(Value::as_array).ok_or_else(bad)?;
    let mut bits = Vec::with_capacity(width * height);
    for r in rows {
        let s = r.as_str().ok_or_else(bad)?;
        for ch in s.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(Error::InvalidParam(format!("mask row char {ch:?}"))),
            }
        }
    }
    Mask::new(width, height, bits)
}
