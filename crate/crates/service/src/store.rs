//! On-disk document collections. Each collection is one JSON object file
//! rewritten atomically on every change.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Corrupt {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug)]
pub struct Collection<T> {
    path: PathBuf,
    items: BTreeMap<String, T>,
}

impl<T: Serialize + DeserializeOwned> Collection<T> {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let items = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|source| StoreError::Corrupt {
                path: path.clone(),
                source,
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(io(&path)(e)),
        };
        Ok(Collection { path, items })
    }

    pub fn get(&self, key: &str) -> Option<&T> {
        self.items.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.items.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &T)> {
        self.items.iter()
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.items.values()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: T) -> Result<Option<T>, StoreError> {
        let old = self.items.insert(key.into(), value);
        self.persist()?;
        Ok(old)
    }

    pub fn remove(&mut self, key: &str) -> Result<Option<T>, StoreError> {
        let old = self.items.remove(key);
        if old.is_some() {
            self.persist()?;
        }
        Ok(old)
    }

    /// Replaces every item in one write.
    pub fn replace_all(&mut self, items: BTreeMap<String, T>) -> Result<(), StoreError> {
        self.items = items;
        self.persist()
    }

    fn persist(&self) -> Result<(), StoreError> {
        let dir = self.path.parent().unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(&self.path))?;
        let text = serde_json::to_vec_pretty(&self.items).expect("collection items serialize");
        tmp.write_all(&text).map_err(io(&self.path))?;
        tmp.as_file().sync_all().map_err(io(&self.path))?;
        tmp.persist(&self.path).map_err(|e| io(&self.path)(e.error))?;
        Ok(())
    }
}

/// Append-only JSON lines file.
#[derive(Debug)]
pub struct JsonLog {
    path: PathBuf,
    file: File,
    lines: usize,
}

impl JsonLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let lines = match File::open(&path) {
            Ok(f) => BufReader::new(f).lines().map_while(Result::ok).filter(|l| !l.trim().is_empty()).count(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(io(&path)(e)),
        };
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        Ok(JsonLog { path, file, lines })
    }

    pub fn len(&self) -> usize {
        self.lines
    }

    pub fn is_empty(&self) -> bool {
        self.lines == 0
    }

    pub fn append<T: Serialize>(&mut self, item: &T) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(item).expect("log items serialize");
        line.push(b'\n');
        self.file.write_all(&line).map_err(io(&self.path))?;
        self.file.sync_data().map_err(io(&self.path))?;
        self.lines += 1;
        Ok(())
    }

    pub fn read_all(&self) -> Result<Vec<serde_json::Value>, StoreError> {
        let f = File::open(&self.path).map_err(io(&self.path))?;
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(io(&self.path))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|source| StoreError::Corrupt {
                path: self.path.clone(),
                source,
            })?);
        }
        Ok(out)
    }
}
