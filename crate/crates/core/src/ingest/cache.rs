//! Content-addressed file cache.
//!
//! Entries live at `<root>/<first two hex chars>/<key>`. Writes go through a
//! temporary file and a rename, and concurrent computations of the same key
//! are serialized so the work happens once.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use image::RgbImage;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of an in-memory image: dimensions followed by raw RGB bytes.
pub fn image_content_hash(image: &RgbImage) -> String {
    let mut h = Sha256::new();
    h.update(image.width().to_le_bytes());
    h.update(image.height().to_le_bytes());
    h.update(image.as_raw());
    hex::encode(h.finalize())
}

/// Hashes a sequence of fields with length prefixes, so field boundaries
/// cannot alias.
pub fn composite_key(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Reads and decodes an image file to RGB8.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path)?;
    decode_image(&bytes, path)
}

pub fn decode_image(bytes: &[u8], path: &Path) -> Result<RgbImage> {
    image::load_from_memory(bytes)
        .map(|img| img.to_rgb8())
        .map_err(|source| Error::Decode {
            path: path.to_path_buf(),
            source,
        })
}

#[derive(Debug, Default)]
struct KeyedLocks {
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl KeyedLocks {
    fn lock_for(&self, key: &str) -> Arc<Mutex<()>> {
        let mut map = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(key.to_string()).or_default().clone()
    }

    fn release(&self, key: &str) {
        let mut map = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(l) = map.get(key) {
            // Only the map and the caller's clone remain.
            if Arc::strong_count(l) <= 2 {
                map.remove(key);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContentStore {
    root: PathBuf,
    locks: Arc<KeyedLocks>,
}

impl ContentStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            locks: Arc::default(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.root.join(shard).join(key)
    }

    pub fn get(&self, key: &str) -> Result<Option<Vec<u8>>> {
        match fs::read(self.path_for(key)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, key: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path_for(key);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Returns the cached bytes for `key`, computing and storing them on a
    /// miss. Concurrent callers with the same key wait for one computation.
    pub fn get_or_insert_with(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<Vec<u8>>,
    ) -> Result<Vec<u8>> {
        if let Some(hit) = self.get(key)? {
            return Ok(hit);
        }
        let lock = self.locks.lock_for(key);
        let result = {
            let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
            match self.get(key)? {
                Some(hit) => Ok(hit),
                None => compute().and_then(|bytes| {
                    self.put(key, &bytes)?;
                    Ok(bytes)
                }),
            }
        };
        drop(lock);
        self.locks.release(key);
        result
    }
}
