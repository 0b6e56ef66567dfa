use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Manifest file name of a command, so that stages sharing an output
/// directory keep their own records.
pub fn file_name(command: &str) -> String {
    format!("{command}.manifest.json")
}

/// Record of one run: enough to repeat it and to check that the repeat
/// produced the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Arguments after the program name, with any config file expanded.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name (inside the output directory) to sha256.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn hash_inputs(paths: &[PathBuf]) -> Result<BTreeMap<String, String>, CliError> {
    paths
        .iter()
        .map(|p| {
            let h = sha256_file(p).map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
            Ok((p.display().to_string(), h))
        })
        .collect()
}

pub fn hash_artifacts(out: &Path, names: &[String]) -> Result<BTreeMap<String, String>, CliError> {
    names
        .iter()
        .map(|n| {
            let p = out.join(n);
            let h = sha256_file(&p).map_err(|e| CliError::Runtime(format!("cannot hash {}: {e}", p.display())))?;
            Ok((n.clone(), h))
        })
        .collect()
}

impl Manifest {
    pub fn write(&self, out: &Path) -> Result<PathBuf, CliError> {
        let path = out.join(file_name(&self.command));
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::write(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Manifest, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{} is not a manifest: {e}", path.display())))
    }

    /// The recorded arguments, optionally redirected to another output
    /// directory.
    pub fn replay_argv(&self, out: Option<&Path>) -> Vec<String> {
        let mut argv = vec!["tssn".to_string()];
        argv.extend(self.argv.iter().cloned());
        if let Some(out) = out {
            argv.push("--out".into());
            argv.push(out.display().to_string());
        }
        argv
    }
}

/// Drops `--config <path>` (already expanded) and the program name.
pub fn recorded_argv(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in argv.iter().skip(1) {
        if skip {
            skip = false;
            continue;
        }
        if a == "--config" {
            skip = true;
            continue;
        }
        if a.starts_with("--config=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}
