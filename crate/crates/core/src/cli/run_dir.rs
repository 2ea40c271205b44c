use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOCK: &str = ".lock";

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    stage: String,
    config_hash: String,
}

/// Exclusive handle on `<root>/<config hash>`. The lock file is removed on drop.
#[derive(Debug)]
pub struct RunDir {
    dir: PathBuf,
    hash: String,
    force: bool,
}

impl RunDir {
    pub fn open(root: &Path, hash: &str, force: bool) -> Result<Self> {
        let dir = root.join(hash);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let lock = dir.join(LOCK);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => Error::InvalidArgument(format!(
                    "run directory {} is locked by another process (remove {} if it is stale)",
                    dir.display(),
                    lock.display()
                )),
                _ => Error::io(&lock, e),
            })?;
        Ok(Self {
            dir,
            hash: hash.to_string(),
            force,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn meta_path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.meta"))
    }

    /// Whether `name` exists and was produced under this config hash. An
    /// artifact from another hash is an error unless forced.
    pub fn is_fresh(&self, name: &str) -> Result<bool> {
        let meta = self.meta_path(name);
        if !self.file(name).exists() || !meta.exists() {
            return Ok(false);
        }
        let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let m: Meta = serde_json::from_str(&text)?;
        if m.config_hash != self.hash && !self.force {
            return Err(Error::InvalidArgument(format!(
                "{} was produced under config {} but this run is {}; pass --force to use it anyway",
                self.file(name).display(),
                m.config_hash,
                self.hash
            )));
        }
        Ok(true)
    }

    /// Path of an artifact the current command depends on.
    pub fn require(&self, stage: &str, name: &str) -> Result<PathBuf> {
        if !self.is_fresh(name)? {
            return Err(Error::MissingPrerequisite {
                stage: stage.to_string(),
                detail: format!("{} is missing; run `{stage}` first", self.file(name).display()),
            });
        }
        Ok(self.file(name))
    }

    /// Records that `name` was produced by `stage` under this hash.
    pub fn mark(&self, stage: &str, name: &str) -> Result<()> {
        let meta = Meta {
            stage: stage.to_string(),
            config_hash: self.hash.clone(),
        };
        let path = self.meta_path(name);
        std::fs::write(&path, serde_json::to_string(&meta)? + "\n").map_err(|e| Error::io(&path, e))
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(self.dir.join(LOCK));
    }
}
