//! Output bookkeeping: every written path is recorded so a failed run can
//! remove what it produced, and each run leaves a manifest behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;

use crate::commands::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    /// Effective arguments after merging the run configuration; passing
    /// them back reproduces the outputs.
    pub argv: Vec<String>,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, seed: Option<u64>, argv: &[String]) -> Self {
        let mut effective = Vec::with_capacity(argv.len());
        let mut skip = false;
        for a in argv.iter().skip(1) {
            if skip {
                skip = false;
            } else if a == "--config" {
                skip = true;
            } else if !a.starts_with("--config=") {
                effective.push(a.clone());
            }
        }
        Self {
            tool: "exhaustkit",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            argv: effective,
        }
    }
}

/// Paths written by the current run, removed on drop unless committed.
#[derive(Debug)]
pub struct Outputs {
    created_dirs: Vec<PathBuf>,
    files: Mutex<Vec<PathBuf>>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self {
            created_dirs: Vec::new(),
            files: Mutex::new(Vec::new()),
            committed: false,
        }
    }

    /// Creates `dir` (and parents), remembering the topmost one created.
    pub fn dir(&mut self, dir: &Path) -> Result<(), CliError> {
        let mut top = None;
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            top = Some(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        self.created_dirs.extend(top);
        Ok(())
    }

    pub fn track(&self, path: &Path) -> PathBuf {
        self.files.lock().expect("output list").push(path.to_path_buf());
        path.to_path_buf()
    }

    pub fn write(&self, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.track(path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn manifest(&self, path: &Path, manifest: &Manifest) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        self.write(path, text + "\n")
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        let files = self.files.get_mut().map(std::mem::take).unwrap_or_default();
        for f in files {
            let _ = fs::remove_file(f);
        }
        for d in &self.created_dirs {
            let _ = fs::remove_dir_all(d);
        }
    }
}
