use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "run_manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Records one command's resolved configuration and input checksums under
/// its name in `<output_dir>/run_manifest.json`, keeping other commands' entries.
pub fn record(config: &RunConfig, command: &str, inputs: &[PathBuf], threads: Option<usize>) -> Result<()> {
    let mut checksums = BTreeMap::new();
    for p in inputs {
        checksums.insert(p.display().to_string(), sha256_file(p)?);
    }
    let entry = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "training_seed": config.training.seed,
        "threads": threads,
        "config": config,
        "inputs": checksums,
    });
    let path = config.output_dir.join(MANIFEST_FILE);
    let mut all: Map<String, Value> = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => Map::new(),
    };
    all.insert(command.to_string(), entry);
    std::fs::write(&path, serde_json::to_string_pretty(&Value::Object(all))? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}
