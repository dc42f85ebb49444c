//! Golden reference cases: `<root>/<lib>/<case>/{input.pnm, params.json,
//! output.pnm}`, plus the mask file named in `params.json` for masked cases.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::pnm::load_pnm_quantized;
use crate::io::read_file;
use crate::tensor::QuantizedImage;

use super::obfuscate;
use super::spec::ObfuscationSpec;

pub const FIXTURES_ENV: &str = "DEOBFUSC_FIXTURES";
pub const LIBRARIES: &[&str] = &["pil", "opencv", "masked"];

/// `$DEOBFUSC_FIXTURES`, else `./fixtures` if present, else the copy shipped
/// with the sources.
pub fn fixture_root() -> PathBuf {
    if let Some(dir) = std::env::var_os(FIXTURES_ENV) {
        return PathBuf::from(dir);
    }
    let local = PathBuf::from("fixtures");
    if local.is_dir() {
        return local;
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[derive(Clone, Debug)]
pub struct FixtureCase {
    pub library: String,
    pub name: String,
    pub dir: PathBuf,
    /// The `library` field of `params.json`.
    pub reference: String,
    pub spec: ObfuscationSpec,
    pub input: QuantizedImage,
    pub expected: QuantizedImage,
}

impl FixtureCase {
    pub fn load(dir: &Path, library: &str) -> Result<Self> {
        let params: serde_json::Value = serde_json::from_slice(&read_file(&dir.join("params.json"))?)?;
        let reference = params
            .get("library")
            .and_then(|v| v.as_str())
            .unwrap_or("")
            .to_string();
        let spec = ObfuscationSpec::from_json_value(&params, &["library"])?.resolved(Some(dir))?;
        Ok(Self {
            library: library.to_string(),
            name: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            dir: dir.to_path_buf(),
            reference,
            spec,
            input: load_pnm_quantized(dir.join("input.pnm"))?,
            expected: load_pnm_quantized(dir.join("output.pnm"))?,
        })
    }

    pub fn run(&self) -> Result<QuantizedImage> {
        Ok(obfuscate(&self.input.dequantize(), &self.spec)?.quantize())
    }

    pub fn check(&self) -> Result<FixtureOutcome> {
        let got = self.run()?;
        let mismatches = if got.channels == self.expected.channels
            && got.width == self.expected.width
            && got.height == self.expected.height
        {
            got.data
                .iter()
                .zip(&self.expected.data)
                .filter(|(a, b)| a != b)
                .count()
        } else {
            usize::MAX
        };
        Ok(FixtureOutcome {
            case: format!("{}/{}", self.library, self.name),
            method: self.spec.method.name().to_string(),
            mismatches,
            pixels: self.expected.data.len(),
        })
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FixtureOutcome {
    pub case: String,
    pub method: String,
    pub mismatches: usize,
    pub pixels: usize,
}

impl FixtureOutcome {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Every case under `root`, sorted by library then name.
pub fn load_all(root: &Path) -> Result<Vec<FixtureCase>> {
    let mut cases = Vec::new();
    for lib in LIBRARIES {
        let dir = root.join(lib);
        if !dir.is_dir() {
            continue;
        }
        let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("params.json").is_file())
            .collect();
        names.sort();
        for case in names {
            cases.push(FixtureCase::load(&case, lib)?);
        }
    }
    if cases.is_empty() {
        return Err(Error::InvalidParam(format!(
            "no fixtures under {}",
            root.display()
        )));
    }
    Ok(cases)
}

pub fn check_all(root: &Path) -> Result<Vec<FixtureOutcome>> {
    load_all(root)?.iter().map(FixtureCase::check).collect()
}
