//! C ABI for `deobfusc`.
//!
//! Images and specs are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a [`DfStatus`];
//! on failure [`df_last_error`] describes the error for the calling thread.
//! Strings returned through `char **` are released with [`df_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use deobfusc::obfuscation::presets::{preset_spec, PresetContext};
use deobfusc::privacy::{audit_group, parse_profiles, MonteCarloOptions};
use deobfusc::reversal::{psnr, reverse, AttackConfig};
use deobfusc::{Error, ImageTensor, ObfuscationSpec};

/// Status codes. Values 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Numeric = 4,
    Parse = 5,
    Shape = 6,
    Unsupported = 7,
    Panic = 8,
}

/// Opaque image handle: planar `channels x height x width` reals in [0, 1].
pub struct DfImage(ImageTensor);

/// Opaque obfuscation spec handle.
pub struct DfSpec(ObfuscationSpec);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DfStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) => DfStatus::Parse,
        Error::Io { .. } => DfStatus::Io,
        Error::Shape(_) => DfStatus::Shape,
        Error::InvalidParam(_) => DfStatus::InvalidArgument,
        Error::Unsupported(_) => DfStatus::Unsupported,
        Error::Numeric(_) => DfStatus::Numeric,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DfStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null argument: {what}"));
            DfStatus::NullArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            DfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::InvalidParam(format!("{what} is not UTF-8"))))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    let c = CString::new(s).map_err(|_| Error::InvalidParam("string holds a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn df_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn df_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Image from `len = channels * width * height` planar values.
///
/// # Safety
/// `data` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_image_new(
    channels: usize,
    width: usize,
    height: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut DfImage,
) -> DfStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let v = std::slice::from_raw_parts(data, len).to_vec();
        put(out, DfImage(ImageTensor::new(channels, width, height, v)?), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_image_load_pnm(path: *const c_char, out: *mut *mut DfImage) -> DfStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        put(out, DfImage(deobfusc::io::load_pnm(Path::new(p))?), "out")
    })
}

/// # Safety
/// `img` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn df_image_save_pnm(img: *const DfImage, path: *const c_char) -> DfStatus {
    guard(|| {
        let img = ref_arg(img, "img")?;
        let p = str_arg(path, "path")?;
        deobfusc::io::save_pnm(&img.0, Path::new(p))?;
        Ok(())
    })
}

/// # Safety
/// `img` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_image_shape(
    img: *const DfImage,
    channels: *mut usize,
    width: *mut usize,
    height: *mut usize,
) -> DfStatus {
    guard(|| {
        let img = ref_arg(img, "img")?;
        if channels.is_null() || width.is_null() || height.is_null() {
            return Err(Fail::Null("shape output"));
        }
        (*channels, *width, *height) = img.0.shape();
        Ok(())
    })
}

/// Copies the planar values into `out`, which holds `len` doubles.
///
/// # Safety
/// `img` must be a live handle; `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn df_image_data(img: *const DfImage, out: *mut f64, len: usize) -> DfStatus {
    guard(|| {
        let img = ref_arg(img, "img")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let d = img.0.data();
        if len != d.len() {
            return Err(Error::Shape(format!("buffer of {len} for {} values", d.len())).into());
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(d);
        Ok(())
    })
}

/// # Safety
/// `img` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn df_image_free(img: *mut DfImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Spec from its JSON form. Mask paths are resolved against the working
/// directory.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_spec_from_json(json: *const c_char, out: *mut *mut DfSpec) -> DfStatus {
    guard(|| {
        let s = str_arg(json, "json")?;
        let spec = ObfuscationSpec::from_json_str(s)?.resolved(None)?;
        put(out, DfSpec(spec), "out")
    })
}

/// Named preset for a `width x height` image.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_spec_preset(
    name: *const c_char,
    width: usize,
    height: usize,
    seed: u64,
    out: *mut *mut DfSpec,
) -> DfStatus {
    guard(|| {
        let n = str_arg(name, "name")?;
        let ctx = PresetContext {
            width,
            height,
            seed,
            ..Default::default()
        };
        put(out, DfSpec(preset_spec(n, &ctx)?), "out")
    })
}

/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_spec_to_json(spec: *const DfSpec, out: *mut *mut c_char) -> DfStatus {
    guard(|| {
        let spec = ref_arg(spec, "spec")?;
        put_string(out, spec.0.to_json_string(), "out")
    })
}

/// # Safety
/// `spec` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn df_spec_free(spec: *mut DfSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// `img` and `spec` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_obfuscate(img: *const DfImage, spec: *const DfSpec, out: *mut *mut DfImage) -> DfStatus {
    guard(|| {
        let (img, spec) = (ref_arg(img, "img")?, ref_arg(spec, "spec")?);
        put(out, DfImage(deobfusc::obfuscation::obfuscate(&img.0, &spec.0)?), "out")
    })
}

/// Reversal attack on an obfuscated image. `attack_json` may be null for
/// the defaults. Writes the averaged reconstruction to `x_star` and, when
/// `result_json` is not null, the attack result as JSON.
///
/// # Safety
/// Handles must be live, strings NUL-terminated, out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn df_reverse(
    obfuscated: *const DfImage,
    spec: *const DfSpec,
    attack_json: *const c_char,
    x_star: *mut *mut DfImage,
    result_json: *mut *mut c_char,
) -> DfStatus {
    guard(|| {
        let (y, spec) = (ref_arg(obfuscated, "obfuscated")?, ref_arg(spec, "spec")?);
        let cfg = if attack_json.is_null() {
            AttackConfig::default()
        } else {
            AttackConfig::from_json_str(str_arg(attack_json, "attack_json")?)?
        };
        if x_star.is_null() {
            return Err(Fail::Null("x_star"));
        }
        let mut res = reverse(&y.0, &spec.0, &cfg)?;
        let json = serde_json::to_string(&res).map_err(Error::from)?;
        if !result_json.is_null() {
            put_string(result_json, json, "result_json")?;
        }
        put(x_star, DfImage(res.x_star.take().expect("reconstruction present")), "x_star")
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_psnr(a: *const DfImage, b: *const DfImage, out: *mut f64) -> DfStatus {
    guard(|| {
        let (a, b) = (ref_arg(a, "a")?, ref_arg(b, "b")?);
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = psnr(&a.0, &b.0)?;
        Ok(())
    })
}

/// Audits a profile group (JSON with `shape` and `profiles`) under `spec`.
/// `monte_carlo_n = 0` disables Monte Carlo estimates.
///
/// # Safety
/// Strings must be NUL-terminated, `spec` live, `audit_json` writable.
#[no_mangle]
pub unsafe extern "C" fn df_analyze(
    profiles_json: *const c_char,
    spec: *const DfSpec,
    alpha: f64,
    epsilon: f64,
    monte_carlo_n: usize,
    seed: u64,
    audit_json: *mut *mut c_char,
) -> DfStatus {
    guard(|| {
        let text = str_arg(profiles_json, "profiles_json")?;
        let spec = ref_arg(spec, "spec")?;
        let v: serde_json::Value = serde_json::from_str(text).map_err(Error::from)?;
        let (shape, group) = parse_profiles(&v)?;
        let mc = (monte_carlo_n > 0).then_some(MonteCarloOptions { n: monte_carlo_n, seed });
        let audit = audit_group(&group, &spec.0, shape, alpha, epsilon, mc)?;
        put_string(audit_json, serde_json::to_string(&audit).map_err(Error::from)?, "audit_json")
    })
}
