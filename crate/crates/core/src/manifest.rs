//! Run manifests: enough to re-run a command and check that it reproduces
//! the same bytes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(&read_file(path)?),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    /// Working directory the relative paths in `argv` refer to.
    pub cwd: PathBuf,
    /// Fully resolved configuration.
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    /// Output paths relative to `out_dir`.
    pub outputs: Vec<FileDigest>,
    pub out_dir: PathBuf,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], config: Value, seed: Option<u64>, out_dir: &Path) -> Result<Self> {
        let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
        Ok(Self {
            tool: "deobfusc".into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            argv: argv.to_vec(),
            cwd,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            out_dir: out_dir.to_path_buf(),
            wall_clock_seconds: 0.0,
        })
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        if !self.inputs.iter().any(|d| d.path == path) {
            self.inputs.push(FileDigest::of(path)?);
        }
        Ok(())
    }

    /// Writes `bytes` atomically under `out_dir` and records its digest.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(FileDigest {
            path: PathBuf::from(name),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn save(&self) -> Result<PathBuf> {
        let path = self.out_dir.join(MANIFEST_FILE);
        write_atomic(&path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&read_file(path)?)?)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.cwd.join(p)
        }
    }

    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Result<Vec<PathBuf>> {
        let mut changed = Vec::new();
        for d in &self.inputs {
            if FileDigest::of(&self.resolve(&d.path))?.sha256 != d.sha256 {
                changed.push(d.path.clone());
            }
        }
        Ok(changed)
    }

    /// Compares the outputs recorded here with those of another run.
    pub fn compare_outputs(&self, other: &RunManifest) -> OutputComparison {
        let mut cmp = OutputComparison::default();
        for d in &self.outputs {
            match other.outputs.iter().find(|o| o.path == d.path) {
                Some(o) if o.sha256 == d.sha256 => cmp.identical.push(d.path.clone()),
                Some(_) => cmp.differing.push(d.path.clone()),
                None => cmp.missing.push(d.path.clone()),
            }
        }
        cmp
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputComparison {
    pub identical: Vec<PathBuf>,
    pub differing: Vec<PathBuf>,
    pub missing: Vec<PathBuf>,
}

impl OutputComparison {
    pub fn bit_identical(&self) -> bool {
        self.differing.is_empty() && self.missing.is_empty() && !self.identical.is_empty()
    }
}
