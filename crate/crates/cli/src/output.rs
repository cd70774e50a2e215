//! Report files are staged in a hidden directory and only moved into
//! place once a command has produced all of them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct Staged {
    dir: tempfile::TempDir,
    dest: PathBuf,
    files: Vec<String>,
}

impl Staged {
    pub fn new(dest: &Path) -> Result<Staged> {
        fs::create_dir_all(dest).with_context(|| format!("creating {}", dest.display()))?;
        let dir = tempfile::Builder::new().prefix(".staging").tempdir_in(dest)?;
        Ok(Staged {
            dir,
            dest: dest.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn add(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.path().join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {name}"))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Moves every staged file to its destination and returns the paths.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for name in &self.files {
            let to = self.dest.join(name);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(self.dir.path().join(name), &to).with_context(|| format!("moving {name} into place"))?;
            out.push(to);
        }
        Ok(out)
    }
}
