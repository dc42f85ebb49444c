use std::ffi::{CStr, CString};
use std::ptr;

use deobfusc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(df_last_error()) }.to_string_lossy().into_owned()
}

fn image(c: usize, w: usize, h: usize, f: impl Fn(usize) -> f64) -> *mut DfImage {
    let data: Vec<f64> = (0..c * w * h).map(f).collect();
    let mut out = ptr::null_mut();
    let st = unsafe { df_image_new(c, w, h, data.as_ptr(), data.len(), &mut out) };
    assert_eq!(st, DfStatus::Ok);
    out
}

fn read(img: *const DfImage) -> Vec<f64> {
    let (mut c, mut w, mut h) = (0, 0, 0);
    unsafe {
        assert_eq!(df_image_shape(img, &mut c, &mut w, &mut h), DfStatus::Ok);
        let mut v = vec![0.0; c * w * h];
        assert_eq!(df_image_data(img, v.as_mut_ptr(), v.len()), DfStatus::Ok);
        v
    }
}

#[test]
fn pixelize_through_the_abi() {
    let img = image(1, 4, 4, |i| (i % 4) as f64 / 3.0);
    let json = CString::new(r#"{"method":"pixelize","blocks":[1,2]}"#).unwrap();
    let mut spec = ptr::null_mut();
    unsafe {
        assert_eq!(df_spec_from_json(json.as_ptr(), &mut spec), DfStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(df_obfuscate(img, spec, &mut out), DfStatus::Ok);
        let v = read(out);
        assert_eq!(v.len(), 16);
        // Left half averages columns 0 and 1, right half columns 2 and 3.
        assert!(v.iter().all(|&x| (x - v[0]).abs() < 1e-12 || (x - v[3]).abs() < 1e-12));
        let mut db = 0.0;
        assert_eq!(df_psnr(out, out, &mut db), DfStatus::Ok);
        assert!(db.is_infinite());
        let mut s = ptr::null_mut();
        assert_eq!(df_spec_to_json(spec, &mut s), DfStatus::Ok);
        assert!(CStr::from_ptr(s).to_str().unwrap().contains("pixelize"));
        df_string_free(s);
        df_image_free(out);
        df_spec_free(spec);
        df_image_free(img);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut out = ptr::null_mut();
        let bad = CString::new(r#"{"method":"pixelize","blocks":[0,2]}"#).unwrap();
        assert_eq!(df_spec_from_json(bad.as_ptr(), &mut out), DfStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        let garbage = CString::new("{not json").unwrap();
        assert_eq!(df_spec_from_json(garbage.as_ptr(), &mut out), DfStatus::Parse);
        assert_eq!(df_spec_from_json(ptr::null(), &mut out), DfStatus::NullArgument);
        let missing = CString::new("/definitely/not/here.pgm").unwrap();
        let mut img = ptr::null_mut();
        assert_eq!(df_image_load_pnm(missing.as_ptr(), &mut img), DfStatus::Io);
        let data = [0.0; 3];
        assert_eq!(df_image_new(1, 2, 2, data.as_ptr(), 3, &mut img), DfStatus::Shape);
        let name = CString::new("blur-small").unwrap();
        assert_eq!(df_spec_preset(name.as_ptr(), 8, 8, 0, &mut out), DfStatus::Ok);
        assert!(last_error().is_empty());
        df_spec_free(out);
        df_image_free(ptr::null_mut());
        df_spec_free(ptr::null_mut());
        df_string_free(ptr::null_mut());
    }
}

#[test]
fn reverse_rejects_noise_and_runs_on_blur() {
    let x = image(1, 8, 8, |i| ((i * 7) % 11) as f64 / 10.0);
    unsafe {
        let dp = CString::new("dppix-2x2").unwrap();
        let mut spec = ptr::null_mut();
        assert_eq!(df_spec_preset(dp.as_ptr(), 8, 8, 1, &mut spec), DfStatus::Ok);
        let mut y = ptr::null_mut();
        assert_eq!(df_obfuscate(x, spec, &mut y), DfStatus::Ok);
        let mut xs = ptr::null_mut();
        assert_eq!(df_reverse(y, spec, ptr::null(), &mut xs, ptr::null_mut()), DfStatus::InvalidArgument);
        df_image_free(y);
        df_spec_free(spec);

        let blur = CString::new("blur-small").unwrap();
        assert_eq!(df_spec_preset(blur.as_ptr(), 8, 8, 0, &mut spec), DfStatus::Ok);
        assert_eq!(df_obfuscate(x, spec, &mut y), DfStatus::Ok);
        let cfg = CString::new(
            r#"{"learning_rate":0.1,"momentum":0.9,"iterations":50,"restarts":2,"init":{"gaussian_noise":{"sd":0.5}},"seed":0,"clamp_each_step":true,"rounding":true}"#,
        )
        .unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(df_reverse(y, spec, cfg.as_ptr(), &mut xs, &mut json), DfStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap();
        assert!(text.contains("final_residual"));
        assert_eq!(read(xs).len(), 64);
        df_string_free(json);
        df_image_free(xs);
        df_image_free(y);
        df_spec_free(spec);
        df_image_free(x);
    }
}

#[test]
fn analyze_crop_group() {
    let profiles = CString::new(
        r#"{"shape":[1,2,2],"profiles":[
            {"id":"a","kind":"point_mass","x":0},
            {"id":"b","kind":"point_mass","x":1},
            {"id":"c","kind":"isotropic_gaussian","mean":0.5,"sd":0.1}]}"#,
    )
    .unwrap();
    let crop = CString::new(r#"{"method":"crop"}"#).unwrap();
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(df_spec_from_json(crop.as_ptr(), &mut spec), DfStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(df_analyze(profiles.as_ptr(), spec, 2.0, 0.0, 0, 0, &mut out), DfStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert_eq!(v["n_min"], 2);
        df_string_free(out);
        df_spec_free(spec);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/deobfusc.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct DfImage DfImage;"));
    assert!(header.contains("DF_STATUS_NUMERIC = 4"));
}
