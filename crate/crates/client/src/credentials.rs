//! Where the coordinator keeps the encrypted admin token: the "lock" half of
//! the two factors. The room key is never stored here.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use blindroom_core::{EncryptedEnvelope, RoomId};

pub trait CredentialStore: Send {
    fn put(&mut self, room: RoomId, token: &EncryptedEnvelope) -> io::Result<()>;
    fn get(&self, room: RoomId) -> Option<EncryptedEnvelope>;
    fn remove(&mut self, room: RoomId);
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    tokens: HashMap<RoomId, EncryptedEnvelope>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CredentialStore for MemoryStore {
    fn put(&mut self, room: RoomId, token: &EncryptedEnvelope) -> io::Result<()> {
        self.tokens.insert(room, token.clone());
        Ok(())
    }

    fn get(&self, room: RoomId) -> Option<EncryptedEnvelope> {
        self.tokens.get(&room).cloned()
    }

    fn remove(&mut self, room: RoomId) {
        self.tokens.remove(&room);
    }
}

/// One owner-only file per room holding the token as base64. Files this
/// store wrote are deleted when it is dropped.
#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
    written: Mutex<Vec<PathBuf>>,
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        create_private_dir(&dir)?;
        Ok(Self { dir, written: Mutex::new(Vec::new()) })
    }

    /// `$XDG_RUNTIME_DIR/blindroom`, else a per-user directory under the system temp dir.
    pub fn default_dir() -> PathBuf {
        match std::env::var_os("XDG_RUNTIME_DIR") {
            Some(d) if !d.is_empty() => PathBuf::from(d).join("blindroom"),
            _ => {
                let user = std::env::var("USER").unwrap_or_else(|_| "user".into());
                std::env::temp_dir().join(format!("blindroom-{user}"))
            }
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, room: RoomId) -> PathBuf {
        self.dir.join(format!("{room}.token"))
    }
}

fn create_private_dir(dir: &Path) -> io::Result<()> {
    #[cfg(unix)]
    {
        use std::os::unix::fs::DirBuilderExt;
        match fs::DirBuilder::new().recursive(true).mode(0o700).create(dir) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Ok(()),
            Err(e) => Err(e),
        }
    }
    #[cfg(not(unix))]
    fs::create_dir_all(dir)
}

fn write_private(path: &Path, contents: &[u8]) -> io::Result<()> {
    use std::io::Write;
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path)?;
    f.write_all(contents)?;
    f.sync_all()
}

impl CredentialStore for FileStore {
    fn put(&mut self, room: RoomId, token: &EncryptedEnvelope) -> io::Result<()> {
        let path = self.path_for(room);
        write_private(&path, format!("{}\n", token.to_base64()).as_bytes())?;
        self.written.lock().unwrap().push(path);
        Ok(())
    }

    fn get(&self, room: RoomId) -> Option<EncryptedEnvelope> {
        let text = fs::read_to_string(self.path_for(room)).ok()?;
        EncryptedEnvelope::from_base64(&text).ok()
    }

    fn remove(&mut self, room: RoomId) {
        let path = self.path_for(room);
        let _ = fs::remove_file(&path);
        self.written.lock().unwrap().retain(|p| p != &path);
    }
}

impl Drop for FileStore {
    fn drop(&mut self) {
        for path in self.written.lock().unwrap().drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}
