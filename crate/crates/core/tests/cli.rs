use std::path::Path;
use std::process::{Command, Output};

use deobfusc::io::save_pnm;
use deobfusc::ImageTensor;
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deobfusc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn reproduces(dir: &Path, out: &str) {
    ok(dir, &["report", out]);
    let rep = json(&dir.join(out).join("rerun/reproduction.json"));
    assert_eq!(rep["bit_identical"], true, "{rep}");
    assert!(!rep["comparison"]["identical"].as_array().unwrap().is_empty());
    assert_eq!(rep["changed_inputs"].as_array().unwrap().len(), 0);
}

fn glyph_image(dir: &Path) {
    let data: Vec<f64> = (0..16 * 16)
        .map(|i| if (i % 16 + i / 16) % 5 < 2 { 0.9 } else { 0.1 })
        .collect();
    save_pnm(&ImageTensor::new(1, 16, 16, data).unwrap(), dir.join("in.pgm")).unwrap();
}

#[test]
fn obfuscate_and_reverse_reproduce() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    glyph_image(d);
    ok(d, &["--seed", "3", "obfuscate", "--preset", "pixelize-4x4", "--out", "obf", "in.pgm"]);
    assert!(d.join("obf/in.pgm").exists());
    reproduces(d, "obf");

    ok(
        d,
        &[
            "--seed", "3", "reverse", "--preset", "pixelize-4x4", "--iterations", "200",
            "--restarts", "3", "--truth", "in.pgm", "--out", "rev", "obf/in.pgm",
        ],
    );
    let r = json(&d.join("rev/result.json"));
    assert!(r["final_residual"].as_f64().unwrap() <= 1e-4, "{r}");
    reproduces(d, "rev");
}

#[test]
fn dp_pix_seed_is_part_of_the_record() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    glyph_image(d);
    ok(d, &["--seed", "9", "obfuscate", "--preset", "dppix-2x2", "--out", "a", "in.pgm"]);
    ok(d, &["--seed", "9", "obfuscate", "--preset", "dppix-2x2", "--out", "b", "in.pgm"]);
    ok(d, &["--seed", "10", "obfuscate", "--preset", "dppix-2x2", "--out", "c", "in.pgm"]);
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    assert_eq!(read("a/in.pgm"), read("b/in.pgm"));
    assert_ne!(read("a/in.pgm"), read("c/in.pgm"));
    reproduces(d, "a");
}

#[test]
fn analyze_crop_and_identity_groups() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("group.json"),
        r#"{"shape":[1,3,3],"profiles":[
            {"id":"a","kind":"point_mass","x":0.0},
            {"id":"b","kind":"point_mass","x":0.5},
            {"id":"c","kind":"isotropic_gaussian","mean":0.2,"sd":0.1},
            {"id":"d","kind":"isotropic_gaussian","mean":0.8,"sd":0.1}]}"#,
    )
    .unwrap();
    std::fs::write(d.join("crop.json"), r#"{"method":"crop"}"#).unwrap();
    ok(d, &["analyze", "--profiles", "group.json", "--spec", "crop.json", "--alpha", "2", "--epsilon", "0", "--out", "crop"]);
    let a = json(&d.join("crop/audit.json"));
    let first = if a.is_array() { &a[0] } else { &a };
    assert_eq!(first["n_min"], 3);
    reproduces(d, "crop");

    std::fs::write(d.join("id.json"), r#"{"method":"pixelize","blocks":[1,1]}"#).unwrap();
    ok(d, &["analyze", "--profiles", "group.json", "--spec", "id.json", "--alpha", "2", "--epsilon", "0", "--out", "id"]);
    let a = json(&d.join("id/audit.json"));
    let first = if a.is_array() { &a[0] } else { &a };
    assert_eq!(first["n_min"], 0);
}

#[test]
fn small_discrimination_run_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("rows.json"),
        r#"{"rows":[{"label":"Pix 4x4","preset":"pixelize-4x4"},{"label":"Crop","preset":"crop"}]}"#,
    )
    .unwrap();
    ok(
        d,
        &[
            "--seed", "1", "discriminate", "--classes", "3", "--train-per-class", "20",
            "--test-per-class", "10", "--epochs", "2", "--specs", "rows.json", "--out", "disc",
        ],
    );
    assert!(d.join("disc/discrimination_report.json").exists());
    reproduces(d, "disc");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    glyph_image(d);
    let code = |args: &[&str]| run(d, args).status.code().unwrap();
    assert_eq!(code(&["obfuscate", "--preset", "no-such-preset", "--out", "o", "in.pgm"]), 2);
    assert_eq!(code(&["obfuscate", "--preset", "blur-small", "--out", "o", "missing.pgm"]), 3);
    assert_eq!(code(&["--strict", "obfuscate", "--preset", "blur-small", "--out", "o", "in.pgm"]), 2);
    assert_eq!(code(&["--strict", "--seed", "1", "obfuscate", "--preset", "blur-small", "--out", "o", "in.pgm"]), 0);
    std::fs::write(d.join("bad.json"), "{not json").unwrap();
    assert_ne!(code(&["obfuscate", "--spec", "bad.json", "--out", "o", "in.pgm"]), 0);
}

#[test]
fn report_flags_a_changed_output() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    glyph_image(d);
    ok(d, &["--seed", "2", "obfuscate", "--preset", "blur-small", "--out", "o", "in.pgm"]);
    let m = d.join("o/manifest.json");
    let mut v = json(&m);
    v["outputs"][0]["sha256"] = Value::String("00".repeat(32));
    std::fs::write(&m, serde_json::to_vec(&v).unwrap()).unwrap();
    assert_eq!(run(d, &["report", "o"]).status.code(), Some(4));
}
