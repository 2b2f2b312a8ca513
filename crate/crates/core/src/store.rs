//! Carrier-side profile persistence: one file per user under a root
//! directory, named by the SHA-256 of the user id. Writes go to a temporary
//! file that is renamed into place.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use crate::codec::Canonical;
use crate::error::Result;
use crate::profile::EncryptedProfile;

const RECORD_EXT: &str = "profile";

#[derive(Debug)]
pub struct ProfileStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ProfileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, locks: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn record_path(&self, user_id: &str) -> PathBuf {
        let key = hex::encode(Sha256::digest(user_id.as_bytes()));
        self.root.join(format!("{key}.{RECORD_EXT}"))
    }

    fn user_lock(&self, user_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("store lock poisoned");
        locks.entry(user_id.to_owned()).or_default().clone()
    }

    /// Stores (or replaces) the profile of `user_id`.
    pub fn put(&self, user_id: &str, profile: &EncryptedProfile) -> Result<()> {
        let lock = self.user_lock(user_id);
        let _guard = lock.lock().expect("user lock poisoned");
        let path = self.record_path(user_id);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        tmp.write_all(&profile.to_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn get(&self, user_id: &str) -> Result<Option<EncryptedProfile>> {
        let bytes = match fs::read(self.record_path(user_id)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        Ok(Some(EncryptedProfile::from_bytes(&bytes)?))
    }

    /// The stored record bytes, exactly as on disk.
    pub fn get_raw(&self, user_id: &str) -> Result<Option<Vec<u8>>> {
        match fs::read(self.record_path(user_id)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}
