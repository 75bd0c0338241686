//! Downloads a dataset named by a sidecar schema.

use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context, Result};

use crate::dataset::CsvSchema;

/// Schema of `name` in `schema_dir`.
pub fn schema_path(schema_dir: &Path, name: &str) -> PathBuf {
    schema_dir.join(format!("{name}.toml"))
}

/// Fetches the file listed in `<schema_dir>/<name>.toml` into `data_dir`
/// with `curl`. An existing file is kept.
pub fn fetch(name: &str, schema_dir: &Path, data_dir: &Path) -> Result<PathBuf> {
    let schema = CsvSchema::load(&schema_path(schema_dir, name))
        .with_context(|| format!("no schema for dataset {name:?}"))?;
    let Some(url) = &schema.url else {
        bail!("schema for {name:?} has no url");
    };
    let file = schema.file.clone().unwrap_or_else(|| format!("{name}.csv"));
    let target = data_dir.join(file);
    if target.exists() {
        log::info!("{} already present", target.display());
        return Ok(target);
    }
    std::fs::create_dir_all(data_dir)?;
    let status = Command::new("curl")
        .args(["--fail", "--silent", "--show-error", "--location", "--output"])
        .arg(&target)
        .arg(url)
        .status()
        .context("running curl")?;
    if !status.success() {
        let _ = std::fs::remove_file(&target);
        bail!("download of {url} failed ({status})");
    }
    Ok(target)
}
