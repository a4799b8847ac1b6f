//! Run manifests: enough provenance (command, flags, seeds, tool version)
//! to reproduce every artifact bit-identically. Wall-clock timing is
//! recorded for the log but is not part of the reproducibility contract.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
    pub finished_unix: u64,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn start(command: &str) -> Self {
        ManifestBuilder {
            started: Instant::now(),
            manifest: RunManifest {
                tool: "stnet",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                flags: BTreeMap::new(),
                seeds: BTreeMap::new(),
                artifacts: Vec::new(),
                wall_clock_seconds: 0.0,
                finished_unix: 0,
            },
        }
    }

    pub fn flag(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.manifest.flags.insert(key.into(), value.to_string());
        self
    }

    pub fn seed(&mut self, key: &str, value: u64) -> &mut Self {
        self.manifest.seeds.insert(key.into(), value);
        self
    }

    pub fn artifact(&mut self, path: &Path) -> &mut Self {
        self.manifest.artifacts.push(path.display().to_string());
        self
    }

    /// Writes `<dir>/manifest.json` or `<file>.manifest.json`.
    pub fn finish(mut self, alongside: &Path) -> Result<PathBuf> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        self.manifest.finished_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let path = if alongside.is_dir() {
            alongside.join("manifest.json")
        } else {
            let mut name = alongside.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            alongside.with_file_name(name)
        };
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(path)
    }
}
