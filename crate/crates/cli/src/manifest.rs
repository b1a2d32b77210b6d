use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, RunConfig};

#[derive(Serialize)]
struct InputEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<InputEntry>,
    outputs: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Internal(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Write `manifest.json` into `out_dir`. Outputs are given relative to
/// `out_dir` and listed sorted. The output directory itself is left out of
/// the recorded config so reruns into different directories agree.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    inputs: &[PathBuf],
    outputs: &[String],
) -> Result<PathBuf, CliError> {
    let mut config_json = serde_json::to_value(config).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(obj) = config_json.as_object_mut() {
        obj.remove("out");
    }
    let mut input_entries = Vec::with_capacity(inputs.len());
    for p in inputs {
        input_entries.push(InputEntry { path: p.display().to_string(), sha256: sha256_file(p)? });
    }
    let mut outputs = outputs.to_vec();
    outputs.sort();
    outputs.dedup();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        seed: config.seed,
        config: config_json,
        inputs: input_entries,
        outputs,
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, json).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
