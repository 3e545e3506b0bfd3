//! Output directory handling, CSV writing and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::settings::Settings;

/// Bumped whenever a CSV column set changes.
pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub schema_version: u32,
    pub seed: u64,
    pub settings: Settings,
    /// File names relative to the manifest.
    pub outputs: Vec<String>,
    /// Column names of each CSV output.
    pub columns: BTreeMap<String, Vec<String>>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }
}

/// Collects the files written by one run.
pub struct OutputDir {
    root: PathBuf,
    outputs: Vec<String>,
    columns: BTreeMap<String, Vec<String>>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), outputs: Vec::new(), columns: BTreeMap::new() })
    }

    /// Writes a CSV with the given header and rows.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.outputs.push(name.to_string());
        self.columns.insert(name.to_string(), header.iter().map(|s| s.to_string()).collect());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.root.join(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, subcommand: &str, settings: &Settings) -> Result<PathBuf> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            seed: settings.seed,
            settings: settings.clone(),
            outputs: self.outputs,
            columns: self.columns,
        };
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Shortest round-trip representation, so replays compare byte for byte.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
