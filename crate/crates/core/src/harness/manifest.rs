use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{run_experiment, ExperimentManifest, ExperimentOutput, RunOptions};
use super::output::sha256_hex;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Output directory when neither the CLI nor the config names one.
pub const DEFAULT_OUT_DIR: &str = "out";
pub const OUT_DIR_ENV: &str = "HYBRID_RL_OUT";

/// Picks the output root: explicit flag, then config, then environment, then `out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Writes every file plus `manifest.json` into `<root>/<experiment>/` and
/// returns that directory.
pub fn write_outputs(output: &ExperimentOutput, root: &Path) -> Result<PathBuf> {
    let dir = root.join(&output.manifest.experiment);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (name, body) in &output.files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&output.manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(dir)
}

pub fn load_manifest(path: &Path) -> Result<ExperimentManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Re-runs the experiment recorded in a manifest and checks every CSV hash.
///
/// CSVs next to the manifest are checked as well when present. Returns the
/// number of hashes compared.
pub fn replay(manifest_path: &Path, parallel: usize) -> Result<usize> {
    let recorded = load_manifest(manifest_path)?;
    let options = RunOptions {
        parallel,
        format: recorded.format,
    };
    let fresh = run_experiment(&recorded.config, &options)?;
    compare_hashes(&recorded, &fresh.manifest)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    for (name, expected) in &recorded.csv_sha256 {
        let path = dir.join(name);
        if let Ok(bytes) = fs::read(&path) {
            let actual = sha256_hex(&bytes);
            if &actual != expected {
                return Err(Error::ReplayMismatch {
                    file: path.display().to_string(),
                    expected: expected.clone(),
                    actual,
                });
            }
        }
    }
    Ok(recorded.csv_sha256.len())
}

fn compare_hashes(recorded: &ExperimentManifest, fresh: &ExperimentManifest) -> Result<()> {
    for (name, expected) in &recorded.csv_sha256 {
        let actual = fresh.csv_sha256.get(name).cloned().unwrap_or_else(|| "<missing>".into());
        if &actual != expected {
            return Err(Error::ReplayMismatch {
                file: name.clone(),
                expected: expected.clone(),
                actual,
            });
        }
    }
    if let Some(extra) = fresh.csv_sha256.keys().find(|k| !recorded.csv_sha256.contains_key(*k)) {
        return Err(Error::ReplayMismatch {
            file: extra.clone(),
            expected: "<missing>".into(),
            actual: fresh.csv_sha256[extra].clone(),
        });
    }
    Ok(())
}
