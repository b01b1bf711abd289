//! Byte counts of a directory tree before and after a run.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirSnapshot {
    files: BTreeMap<PathBuf, u64>,
}

impl DirSnapshot {
    pub fn take(root: &Path) -> io::Result<Self> {
        let mut files = BTreeMap::new();
        walk(root, root, &mut files)?;
        Ok(Self { files })
    }

    pub fn total_bytes(&self) -> u64 {
        self.files.values().sum()
    }

    pub fn file_count(&self) -> usize {
        self.files.len()
    }
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, u64>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let meta = entry.metadata()?;
        let path = entry.path();
        if meta.is_dir() {
            walk(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
            out.insert(rel, meta.len());
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StorageDelta {
    /// Bytes in files that appeared or grew.
    pub persisted_bytes: u64,
    pub new_files: Vec<PathBuf>,
    pub changed_files: Vec<PathBuf>,
}

impl StorageDelta {
    pub fn is_zero(&self) -> bool {
        self.persisted_bytes == 0 && self.new_files.is_empty() && self.changed_files.is_empty()
    }
}

pub fn storage_probe(before: &DirSnapshot, after: &DirSnapshot) -> StorageDelta {
    let mut d = StorageDelta::default();
    for (path, &len) in &after.files {
        match before.files.get(path) {
            None => {
                d.persisted_bytes += len;
                d.new_files.push(path.clone());
            }
            Some(&old) if old != len => {
                d.persisted_bytes += len.saturating_sub(old);
                d.changed_files.push(path.clone());
            }
            Some(_) => {}
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_new_and_grown_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a"), b"12").unwrap();
        let before = DirSnapshot::take(dir.path()).unwrap();
        assert!(storage_probe(&before, &DirSnapshot::take(dir.path()).unwrap()).is_zero());
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/b"), b"xyz").unwrap();
        fs::write(dir.path().join("a"), b"1234").unwrap();
        let d = storage_probe(&before, &DirSnapshot::take(dir.path()).unwrap());
        assert_eq!(d.persisted_bytes, 5);
        assert_eq!(d.new_files, vec![PathBuf::from("sub/b")]);
        assert_eq!(d.changed_files, vec![PathBuf::from("a")]);
    }
}
