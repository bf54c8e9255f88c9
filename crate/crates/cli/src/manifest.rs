use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";

/// Record of one invocation, written last into its output directory.
#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    /// The configuration after defaults and overrides were applied.
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Output directory plus the bookkeeping for its manifest.
pub struct OutDir {
    dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl OutDir {
    pub fn create(dir: &Path, subcommand: &'static str) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                subcommand,
                tool_version: env!("CARGO_PKG_VERSION"),
                seed: None,
                config: serde_json::Value::Null,
                inputs: BTreeMap::new(),
                outputs: Vec::new(),
                wall_time_s: 0.0,
            },
        })
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn config(&mut self, config: impl Serialize) -> Result<()> {
        self.manifest.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.manifest.inputs.insert(name.to_string(), path.display().to_string());
    }

    /// Creates `name` in the directory and hands a buffered writer to `f`.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        f(&mut w)?;
        w.flush()?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        std::fs::write(self.dir.join(MANIFEST), text)?;
        Ok(())
    }
}
