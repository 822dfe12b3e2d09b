//! Input checks and output writes with the file path attached to errors.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use metaug_core::corpus::{load_dataset, CollegeMapping, Dataset, RecordFormat};

use crate::usage;

/// Fails unless `path` is an existing regular file.
pub fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("{}: no such file", path.display());
    }
    Ok(())
}

pub fn require_dir(path: &Path) -> anyhow::Result<()> {
    if !path.is_dir() {
        bail!("{}: no such directory", path.display());
    }
    Ok(())
}

/// Rejects an output that would overwrite one of the inputs.
pub fn distinct_output(out: &Path, inputs: &[&Path]) -> anyhow::Result<()> {
    for input in inputs {
        if out == *input {
            return Err(usage(format!("--out {} is also an input", out.display())));
        }
    }
    Ok(())
}

pub fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| path.display().to_string())
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
    }
    fs::write(path, contents).with_context(|| path.display().to_string())
}

pub fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| path.display().to_string())
}

pub fn record_format(path: &Path, flag: Option<&str>) -> anyhow::Result<RecordFormat> {
    match flag {
        Some(f) => f.parse().map_err(usage),
        None => RecordFormat::from_path(path).ok_or_else(|| {
            usage(format!(
                "cannot infer the format of {}; pass --format jsonl or --format csv",
                path.display()
            ))
        }),
    }
}

pub fn load_records(path: &Path, format: RecordFormat) -> anyhow::Result<Dataset> {
    load_dataset(path, format).with_context(|| path.display().to_string())
}

pub fn load_mapping(path: &Path) -> anyhow::Result<CollegeMapping> {
    require_file(path)?;
    CollegeMapping::load(path).with_context(|| path.display().to_string())
}
