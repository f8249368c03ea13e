//! Plain-file storage under a data directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const KINDS: [&str; 4] = ["scenarios", "trajectories", "strategies", "results"];

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Store {
    pub fn open(root: impl AsRef<Path>) -> io::Result<Self> {
        let root = root.as_ref().to_path_buf();
        for kind in KINDS {
            fs::create_dir_all(root.join(kind))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: &str, name: &str) -> PathBuf {
        self.root.join(kind).join(format!("{name}.json"))
    }

    pub fn put(&self, kind: &str, name: &str, text: &str) -> io::Result<()> {
        let path = self.path(kind, name);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text)?;
        fs::rename(tmp, path)
    }

    /// Stores `text` under its SHA-256 and returns the hash.
    pub fn put_hashed(&self, kind: &str, text: &str) -> io::Result<String> {
        let id = sha256_hex(text);
        if !self.path(kind, &id).exists() {
            self.put(kind, &id, text)?;
        }
        Ok(id)
    }

    pub fn get(&self, kind: &str, name: &str) -> io::Result<Option<String>> {
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Ok(None);
        }
        match fs::read_to_string(self.path(kind, name)) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}

impl Store {
    /// All `(name, text)` entries of one kind, sorted by name.
    pub fn list(&self, kind: &str) -> io::Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join(kind))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    out.push((stem.to_owned(), fs::read_to_string(&path)?));
                }
            }
        }
        out.sort();
        Ok(out)
    }
}
