//! Run directories: every output file is listed with its digest in
//! `manifest.json`, which carries no timestamps or absolute paths so reruns
//! compare byte for byte. Wall-clock time and the invocation go to
//! `provenance.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const PROVENANCE: &str = "provenance.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct InputEntry {
    role: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    settings: &'a Value,
    inputs: &'a [InputEntry],
    files: &'a [FileEntry],
}

#[derive(Serialize)]
struct Provenance<'a> {
    created_at: String,
    argv: Vec<String>,
    command: &'a str,
    inputs: Vec<(String, String)>,
    out_dir: String,
}

pub struct RunDir {
    root: PathBuf,
    command: &'static str,
    files: Vec<FileEntry>,
    inputs: Vec<InputEntry>,
    input_paths: Vec<(String, String)>,
}

impl RunDir {
    pub fn create(root: &Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating run directory {}", root.display()))?;
        Ok(RunDir { root: root.to_path_buf(), command, files: Vec::new(), inputs: Vec::new(), input_paths: Vec::new() })
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputEntry { role: role.into(), sha256: sha256_hex(&bytes) });
        self.input_paths.push((role.into(), path.display().to_string()));
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let bytes = bytes.as_ref();
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(FileEntry { name: name.into(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(mut self, settings: &impl Serialize) -> Result<PathBuf> {
        self.files.sort_by(|a, b| a.name.cmp(&b.name));
        let settings = serde_json::to_value(settings)?;
        let manifest = Manifest {
            tool: "t2drisk",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            settings: &settings,
            inputs: &self.inputs,
            files: &self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)?;
        let provenance = Provenance {
            created_at: chrono::Utc::now().to_rfc3339(),
            argv: std::env::args().collect(),
            command: self.command,
            inputs: self.input_paths,
            out_dir: self.root.display().to_string(),
        };
        fs::write(self.root.join(PROVENANCE), serde_json::to_string_pretty(&provenance)? + "\n")?;
        Ok(self.root)
    }
}
