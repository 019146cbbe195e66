use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use minlab_core::report::VERSION;
use minlab_core::{Error, Result};

/// An input file and the digest of its bytes at run time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(InputDigest { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedOverrides {
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub n: Option<usize>,
}

/// Everything needed to repeat a run. Wall-clock data lives here and never
/// in report files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Subcommand arguments, without global flags.
    pub argv: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub overrides: SeedOverrides,
    pub out_dir: PathBuf,
    pub outputs: Vec<String>,
    pub threads: Option<usize>,
    pub version: String,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, inputs: Vec<InputDigest>, overrides: SeedOverrides, out_dir: &Path) -> Self {
        RunManifest {
            command: command.into(),
            argv,
            inputs,
            overrides,
            out_dir: out_dir.to_path_buf(),
            outputs: Vec::new(),
            threads: None,
            version: VERSION.into(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    /// Fails when an input changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = sha256_file(&input.path)?;
            if now != input.sha256 {
                return Err(Error::validation(format!(
                    "{} changed since the run: sha256 {} != recorded {}",
                    input.path.display(),
                    now,
                    input.sha256
                )));
            }
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}
