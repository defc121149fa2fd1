use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Written as `<out>.manifest.json` next to the main artifact. Rerunning
/// `command` reproduces every listed output; `wall_time_s` is the only
/// field that changes between reruns.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_file(p: &Path) -> Result<String, CliError> {
    let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: Vec<String>, seed: Option<u64>, wall_time_s: f64, outputs: &[PathBuf]) -> Result<Self, CliError> {
        let outputs = outputs
            .iter()
            .map(|p| {
                Ok(OutputDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(RunManifest {
            command,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s,
            outputs,
        })
    }

    pub fn write_next_to(&self, main: &Path) -> Result<PathBuf, CliError> {
        let mut name = main.as_os_str().to_owned();
        name.push(".manifest.json");
        let p = PathBuf::from(name);
        let text = serde_json::to_string_pretty(self).expect("serializable") + "\n";
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}
