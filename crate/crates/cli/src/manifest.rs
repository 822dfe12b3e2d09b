//! Run manifests.
//!
//! A manifest is written with status `started` before the first output and
//! rewritten with status `complete` once every output is on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::files;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: String,
}

pub struct Run {
    path: PathBuf,
    manifest: RunManifest,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Manifest location for a single-file output: `<out>.manifest.json`.
pub fn beside(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Manifest location for a directory output.
pub fn inside(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

impl Run {
    /// Writes the manifest listing the planned outputs.
    pub fn start(
        subcommand: &str,
        path: PathBuf,
        config: impl Serialize,
        seeds: &[(&str, u64)],
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
    ) -> anyhow::Result<Self> {
        let manifest = RunManifest {
            subcommand: subcommand.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config: serde_json::to_value(config).context("serializing resolved config")?,
            seeds: seeds.iter().map(|(k, v)| ((*k).to_owned(), *v)).collect(),
            inputs,
            outputs,
            started_at: now(),
            finished_at: None,
            status: "started".into(),
        };
        let run = Self { path, manifest };
        run.save()?;
        Ok(run)
    }

    /// Adds an output that was not known when the run started.
    pub fn record_output(&mut self, path: PathBuf) {
        if !self.manifest.outputs.contains(&path) {
            self.manifest.outputs.push(path);
        }
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.manifest.finished_at = Some(now());
        self.manifest.status = "complete".into();
        self.save()
    }

    fn save(&self) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        files::write(&self.path, text)
    }
}
