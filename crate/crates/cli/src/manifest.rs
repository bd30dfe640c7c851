use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of a completed run. Written last, so its presence marks the
/// output directory as complete.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub jobs: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<PathBuf>,
    pub duration_secs: f64,
}

/// Output directory of one command invocation.
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<PathBuf>,
    inputs: Vec<InputHash>,
    started: Instant,
}

impl RunDir {
    /// Creates `root` if needed. Fails if a manifest already exists there,
    /// unless `force` is set.
    pub fn open(root: &Path, force: bool) -> anyhow::Result<Self> {
        let manifest = root.join(MANIFEST);
        if manifest.exists() && !force {
            bail!("{} exists; pass --force to overwrite", manifest.display());
        }
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        if manifest.exists() {
            fs::remove_file(&manifest).with_context(|| format!("cannot remove {}", manifest.display()))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
            inputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn add_input(&mut self, path: &Path) -> anyhow::Result<()> {
        let sha256 = npclust::corpus_io::file_sha256(path)?;
        self.inputs.push(InputHash {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    /// Lists a file written by other means as an output.
    pub fn record(&mut self, name: &str) {
        self.outputs.push(PathBuf::from(name));
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(PathBuf::from(name));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut json = serde_json::to_string_pretty(value)?;
        json.push('\n');
        self.write(name, &json)
    }

    pub fn finish(self, command: &str, seed: u64, jobs: usize, config: serde_json::Value) -> anyhow::Result<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            jobs,
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))
    }
}

/// CSV text with a header row and one line per record.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
