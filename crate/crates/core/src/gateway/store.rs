use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::GatewayError;

pub const KINDS: &[&str] = &["projects", "demos", "sessions", "jobs"];

/// JSON documents in one directory per kind. Writes go to a temporary file
/// that is renamed over the target, so readers only ever see complete
/// documents.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    write: Mutex<()>,
}

impl Store {
    /// Opens or creates a store. Every document is parsed once so that a
    /// damaged store is reported at startup instead of on first access.
    /// Leftover temporary files from interrupted writes are removed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, GatewayError> {
        let root = root.into();
        for kind in KINDS {
            let dir = root.join(kind);
            fs::create_dir_all(&dir).map_err(|e| GatewayError::Io(format!("{}: {e}", dir.display())))?;
            for entry in fs::read_dir(&dir).map_err(|e| GatewayError::Io(e.to_string()))? {
                let path = entry.map_err(|e| GatewayError::Io(e.to_string()))?.path();
                match path.extension().and_then(|e| e.to_str()) {
                    Some("tmp") => {
                        let _ = fs::remove_file(&path);
                    }
                    Some("json") => {
                        let text = fs::read_to_string(&path).map_err(|_| GatewayError::StoreCorrupt(path.clone()))?;
                        serde_json::from_str::<serde_json::Value>(&text).map_err(|_| GatewayError::StoreCorrupt(path.clone()))?;
                    }
                    _ => {}
                }
            }
        }
        Ok(Store { root, write: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: &str, id: &str) -> PathBuf {
        self.root.join(kind).join(format!("{id}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, kind: &str, id: &str) -> Result<Option<T>, GatewayError> {
        if !valid_id(id) {
            return Ok(None);
        }
        let path = self.path(kind, id);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|_| GatewayError::StoreCorrupt(path)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(GatewayError::Io(e.to_string())),
        }
    }

    pub fn put<T: Serialize>(&self, kind: &str, id: &str, value: &T) -> Result<(), GatewayError> {
        assert!(valid_id(id), "generated ids are path-safe");
        let bytes = serde_json::to_vec_pretty(value).map_err(|e| GatewayError::Io(e.to_string()))?;
        let _guard = self.write.lock().unwrap_or_else(|e| e.into_inner());
        write_atomic(&self.path(kind, id), &bytes, None).map_err(|e| GatewayError::Io(e.to_string()))
    }

    pub fn ids(&self, kind: &str) -> Result<Vec<String>, GatewayError> {
        let mut out: Vec<String> = fs::read_dir(self.root.join(kind))
            .map_err(|e| GatewayError::Io(e.to_string()))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".json").map(str::to_string)
            })
            .collect();
        out.sort();
        Ok(out)
    }

    /// Stores a new document under the next free id. Allocation and write
    /// happen under the writer lock, so concurrent inserts never collide.
    pub fn insert<T: Serialize>(&self, kind: &str, prefix: &str, make: impl FnOnce(&str) -> T) -> Result<T, GatewayError> {
        let _guard = self.write.lock().unwrap_or_else(|e| e.into_inner());
        let id = self.next_id(kind, prefix)?;
        let value = make(&id);
        let bytes = serde_json::to_vec_pretty(&value).map_err(|e| GatewayError::Io(e.to_string()))?;
        write_atomic(&self.path(kind, &id), &bytes, None).map_err(|e| GatewayError::Io(e.to_string()))?;
        Ok(value)
    }

    /// Next free id of the form `{prefix}-{n}`.
    pub fn next_id(&self, kind: &str, prefix: &str) -> Result<String, GatewayError> {
        let ids = self.ids(kind)?;
        let n = ids
            .iter()
            .filter_map(|id| id.strip_prefix(prefix)?.strip_prefix('-')?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        Ok(format!("{prefix}-{}", n + 1))
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Writes `bytes` to a sibling temporary file, syncs it and renames it over
/// `path`. With `crash_after` set, stops after that many bytes as if the
/// process had died, leaving only the temporary file behind.
pub fn write_atomic(path: &Path, bytes: &[u8], crash_after: Option<usize>) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut f = fs::File::create(&tmp)?;
    if let Some(n) = crash_after {
        f.write_all(&bytes[..n.min(bytes.len())])?;
        return Err(io::Error::new(io::ErrorKind::Interrupted, "simulated crash"));
    }
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.next_id("projects", "project").unwrap(), "project-1");
        store.put("projects", "project-1", &serde_json::json!({"a": 1})).unwrap();
        let v: serde_json::Value = store.get("projects", "project-1").unwrap().unwrap();
        assert_eq!(v["a"], 1);
        assert_eq!(store.next_id("projects", "project").unwrap(), "project-2");
        assert!(store.get::<serde_json::Value>("projects", "../etc").unwrap().is_none());
    }

    #[test]
    fn interrupted_write_keeps_old_document() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.put("demos", "d", &serde_json::json!({"v": 1})).unwrap();
        let path = dir.path().join("demos/d.json");
        let new = serde_json::to_vec(&serde_json::json!({"v": 2, "padding": "x".repeat(100)})).unwrap();
        for cut in [0, 1, new.len() / 2, new.len() - 1] {
            assert!(write_atomic(&path, &new, Some(cut)).is_err());
            let reopened = Store::open(dir.path()).unwrap();
            let v: serde_json::Value = reopened.get("demos", "d").unwrap().unwrap();
            assert_eq!(v["v"], 1);
            assert!(!dir.path().join("demos/d.json.tmp").exists());
        }
    }

    #[test]
    fn corrupt_document_fails_open() {
        let dir = tempfile::tempdir().unwrap();
        Store::open(dir.path()).unwrap();
        fs::write(dir.path().join("sessions/broken.json"), "{\"half\": ").unwrap();
        match Store::open(dir.path()) {
            Err(GatewayError::StoreCorrupt(p)) => assert!(p.ends_with("sessions/broken.json")),
            other => panic!("{other:?}"),
        }
    }
}
